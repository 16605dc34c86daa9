//! Cross-task averages and rank tables.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{MetricsError, TaskMetrics};

/// Metrics of one (task, solver, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub task: String,
    pub solver: String,
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub metrics: TaskMetrics,
}

/// One solver on one task, averaged over its seeds and ranked against the
/// other solvers on that task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSolverRow {
    pub task: String,
    pub solver: String,
    pub runs: usize,
    pub score: f64,
    pub aup_d: f64,
    pub best_time: f64,
    pub stop_time: f64,
    pub best_result: Option<f64>,
    /// Fraction of runs that reached the table optimum.
    pub hit: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub tasks: usize,
    pub score: f64,
    pub aup_d: f64,
    pub best_time: f64,
    pub stop_time: f64,
    /// Mean best value relative to each task's optimum.
    pub best_result: f64,
    /// Hit rate over tasks.
    pub hit: f64,
    /// Average of the per-task ranks.
    pub mean_rank: f64,
    /// Rank of the mean score among solvers.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<TaskSolverRow>,
    pub solvers: Vec<SolverSummary>,
}

const TIE: f64 = 1e-12;

/// Ranks by descending score; tied entries share the better rank and the
/// next distinct score skips past them (1, 2, 2, 4).
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| 1 + scores.iter().filter(|&&o| o > s + TIE).count())
        .collect()
}

pub fn hit_rate(hits: &[bool]) -> Result<f64, MetricsError> {
    if hits.is_empty() {
        return Err(MetricsError::NoTasks);
    }
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn aggregate(cells: &[RunCell]) -> Result<AggregateReport, MetricsError> {
    if cells.is_empty() {
        return Err(MetricsError::NoTasks);
    }
    // (solver -> task -> runs), both in first-appearance order.
    let mut grouped: IndexMap<&str, IndexMap<&str, Vec<&TaskMetrics>>> = IndexMap::new();
    let mut tasks: Vec<&str> = Vec::new();
    for c in cells {
        if !tasks.contains(&c.task.as_str()) {
            tasks.push(&c.task);
        }
        grouped
            .entry(&c.solver)
            .or_default()
            .entry(&c.task)
            .or_default()
            .push(&c.metrics);
    }
    for (solver, per_task) in &grouped {
        if per_task.len() != tasks.len() {
            return Err(MetricsError::MismatchedTaskSets((*solver).to_string()));
        }
    }

    let mut rows: Vec<TaskSolverRow> = Vec::new();
    let mut normalized: Vec<f64> = Vec::new();
    for task in &tasks {
        let start = rows.len();
        for (solver, per_task) in &grouped {
            let runs = &per_task[task];
            let bests: Vec<f64> = runs.iter().filter_map(|m| m.best_result).collect();
            rows.push(TaskSolverRow {
                task: (*task).to_string(),
                solver: (*solver).to_string(),
                runs: runs.len(),
                score: mean(runs.iter().map(|m| m.score)),
                aup_d: mean(runs.iter().map(|m| m.aup_d)),
                best_time: mean(runs.iter().map(|m| m.t_best)),
                stop_time: mean(runs.iter().map(|m| m.t_stop)),
                best_result: (!bests.is_empty()).then(|| mean(bests.iter().copied())),
                hit: mean(runs.iter().map(|m| if m.hit { 1.0 } else { 0.0 })),
                rank: 0,
            });
            normalized.push(mean(runs.iter().map(|m| m.best_normalized)));
        }
        let scores: Vec<f64> = rows[start..].iter().map(|r| r.score).collect();
        for (row, rank) in rows[start..].iter_mut().zip(competition_ranks(&scores)) {
            row.rank = rank;
        }
    }

    let mut solvers: Vec<SolverSummary> = grouped
        .keys()
        .map(|solver| {
            let picks = || {
                rows.iter()
                    .zip(&normalized)
                    .filter(move |(r, _)| r.solver == *solver)
            };
            SolverSummary {
                solver: (*solver).to_string(),
                tasks: tasks.len(),
                score: mean(picks().map(|(r, _)| r.score)),
                aup_d: mean(picks().map(|(r, _)| r.aup_d)),
                best_time: mean(picks().map(|(r, _)| r.best_time)),
                stop_time: mean(picks().map(|(r, _)| r.stop_time)),
                best_result: mean(picks().map(|(_, n)| *n)),
                hit: mean(picks().map(|(r, _)| r.hit)),
                mean_rank: mean(picks().map(|(r, _)| r.rank as f64)),
                rank: 0,
            }
        })
        .collect();
    let scores: Vec<f64> = solvers.iter().map(|s| s.score).collect();
    for (s, rank) in solvers.iter_mut().zip(competition_ranks(&scores)) {
        s.rank = rank;
    }
    Ok(AggregateReport { rows, solvers })
}
