//! Serializable benchmark report and its plain-text tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::aggregate::{AggregateReport, RunCell};
use super::display4;
use crate::model::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub name: String,
    pub direction: Direction,
    pub metric: String,
    pub cardinality: usize,
    pub optimum: f64,
}

/// Performance-profile points of one run, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSeries {
    pub task: String,
    pub solver: String,
    pub seed: Option<u64>,
    pub points: Vec<(f64, usize)>,
}

/// A run that could not be completed or evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub task: String,
    pub solver: String,
    pub seed: Option<u64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tasks: Vec<TaskInfo>,
    pub runs: Vec<RunCell>,
    pub aggregate: Option<AggregateReport>,
    #[serde(default)]
    pub profiles: Vec<ProfileSeries>,
    #[serde(default)]
    pub failures: Vec<RunFailure>,
}

fn best(x: Option<f64>) -> String {
    x.map(display4).unwrap_or_else(|| "-".into())
}

impl ReportDocument {
    /// Per-run table: one line per (task, solver, seed).
    pub fn runs_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<12} {:>6} {:>8} {:>8} {:>9} {:>9} {:>11} {:>4}",
            "task", "solver", "seed", "score", "aup_d", "best_time", "stop_time", "best_result", "hit"
        );
        for r in &self.runs {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<16} {:<12} {:>6} {:>8} {:>8} {:>9} {:>9} {:>11} {:>4}",
                r.task,
                r.solver,
                r.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                display4(m.score),
                display4(m.aup_d),
                display4(m.t_best),
                display4(m.t_stop),
                best(m.best_result),
                if m.hit { "yes" } else { "no" },
            );
        }
        out
    }

    /// Per-task ranks followed by the cross-task averages.
    pub fn ranks_table(&self) -> String {
        let mut out = String::new();
        let Some(agg) = &self.aggregate else {
            out.push_str("no aggregate (no successful runs)\n");
            return out;
        };
        let _ = writeln!(out, "{:<16} {:<12} {:>8} {:>8} {:>5}", "task", "solver", "score", "hit", "rank");
        for r in &agg.rows {
            let _ = writeln!(
                out,
                "{:<16} {:<12} {:>8} {:>8} {:>5}",
                r.task,
                r.solver,
                display4(r.score),
                display4(r.hit),
                r.rank
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>9} {:>9} {:>11} {:>8} {:>9} {:>5}",
            "solver", "score", "aup_d", "best_time", "stop_time", "best_result", "hit", "mean_rank", "rank"
        );
        for s in &agg.solvers {
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>9} {:>9} {:>11} {:>8} {:>9} {:>5}",
                s.solver,
                display4(s.score),
                display4(s.aup_d),
                display4(s.best_time),
                display4(s.stop_time),
                display4(s.best_result),
                display4(s.hit),
                format!("{:.2}", s.mean_rank),
                s.rank
            );
        }
        out
    }

    pub fn failures_table(&self) -> String {
        let mut out = String::new();
        for f in &self.failures {
            let _ = writeln!(
                out,
                "FAILED {} / {} (seed {}): {}",
                f.task,
                f.solver,
                f.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                f.error
            );
        }
        out
    }
}
