//! Search-quality metrics over completed-trial trajectories.
//!
//! Per task: gain (normalized quality of the best value found), best time
//! (normalized ordinal of first reaching the table optimum), stop time
//! (normalized ordinal of the last trial) and the combined score
//! `gain * (1 - (best_time + stop_time) / 2)`. The diversity measure
//! [`aup_d`] lives in [`profile`]; cross-task averaging and ranking in
//! [`aggregate`].
//!
//! All functions are pure.

pub mod aggregate;
mod occupancy;
pub mod profile;
pub mod report;

pub use aggregate::{aggregate, hit_rate, AggregateReport, RunCell, SolverSummary, TaskSolverRow};
pub use occupancy::{quantile, region_occupancy, Occupancy};
pub use profile::{
    aup_d, performance_profile, performance_ratio, profile_moments, ratios, Profile,
    ProfileMoments,
};

use serde::{Deserialize, Serialize};

use crate::model::{Direction, Study};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("objective value {0} is not positive; shift the task's values first")]
    NonPositiveDomain(f64),
    #[error("baseline trajectory has zero-width support but the evaluated one does not")]
    DegenerateBaseline,
    #[error("quantiles must satisfy 0 < low < high < 1")]
    BadQuantiles,
    #[error("solvers were evaluated on different task sets (`{0}`)")]
    MismatchedTaskSets(String),
    #[error("no tasks to aggregate")]
    NoTasks,
}

/// Extremes and size of a task's full table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceStats {
    pub min: f64,
    pub max: f64,
    pub cardinality: usize,
}

impl SpaceStats {
    pub fn from_values(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            min,
            max,
            cardinality: values.len(),
        }
    }
}

/// Objective values of completed trials in ordinal order, plus the facts
/// about the full table needed to normalize them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub direction: Direction,
    /// 1-based ordinal of the last executed trial.
    pub stop_ordinal: usize,
    pub space_min: f64,
    pub space_max: f64,
    /// Optimum over the whole table.
    pub global_best: f64,
    /// Trials an exhaustive solver would run (the table cardinality); the
    /// denominator of both time measures.
    pub budget: usize,
}

impl Trajectory {
    pub fn new(values: Vec<f64>, direction: Direction, stats: SpaceStats) -> Self {
        let global_best = match direction {
            Direction::Maximize => stats.max,
            Direction::Minimize => stats.min,
        };
        Self {
            stop_ordinal: values.len(),
            values,
            direction,
            space_min: stats.min,
            space_max: stats.max,
            global_best,
            budget: stats.cardinality,
        }
    }

    pub fn from_study(study: &Study, stats: SpaceStats) -> Self {
        Self::new(study.values(), study.direction, stats)
    }

    /// Values up to and including the stop ordinal.
    pub fn executed(&self) -> &[f64] {
        &self.values[..self.stop_ordinal.min(self.values.len())]
    }

    pub fn best_found(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for &v in self.executed() {
            match best {
                Some(b) if !self.direction.is_better(v, b) => {}
                _ => best = Some(v),
            }
        }
        best
    }

    pub fn hit(&self) -> bool {
        self.best_found() == Some(self.global_best)
    }
}

pub fn gain(traj: &Trajectory) -> Result<f64, MetricsError> {
    let best = traj.best_found().ok_or(MetricsError::EmptyTrajectory)?;
    let range = traj.space_max - traj.space_min;
    if range <= 0.0 {
        // Constant table: whatever was picked is optimal.
        return Ok(1.0);
    }
    let g = match traj.direction {
        Direction::Maximize => (best - traj.space_min) / range,
        Direction::Minimize => (traj.space_max - best) / range,
    };
    Ok(g.clamp(0.0, 1.0))
}

/// `m / M` for the first ordinal `m` reaching the table optimum, or exactly
/// 1 when the optimum was never found.
pub fn best_time(traj: &Trajectory) -> Result<f64, MetricsError> {
    let executed = traj.executed();
    if executed.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    match executed.iter().position(|&v| v == traj.global_best) {
        Some(i) => Ok(((i + 1) as f64 / traj.budget as f64).min(1.0)),
        None => Ok(1.0),
    }
}

pub fn stop_time(traj: &Trajectory) -> Result<f64, MetricsError> {
    if traj.executed().is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    Ok((traj.stop_ordinal as f64 / traj.budget as f64).min(1.0))
}

pub fn p_total(t_best: f64, t_stop: f64) -> f64 {
    (t_stop + t_best) / 2.0
}

pub fn task_score(gain: f64, t_best: f64, t_stop: f64) -> f64 {
    gain * (1.0 - p_total(t_best, t_stop))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub gain: f64,
    #[serde(rename = "best_time")]
    pub t_best: f64,
    #[serde(rename = "stop_time")]
    pub t_stop: f64,
    pub p_total: f64,
    pub score: f64,
    pub aup_d: f64,
    /// Best value found, in task units.
    pub best_result: Option<f64>,
    /// Best value found relative to the optimum, in `(0, 1]`.
    pub best_normalized: f64,
    pub hit: bool,
    pub completed: usize,
}

/// All per-task metrics of `traj`, with the diversity term normalized by the
/// grid-search `baseline` on the same task.
///
/// A trajectory with no completed trials scores zero everywhere except
/// `best_time`, which reports "optimum not found".
pub fn evaluate(traj: &Trajectory, baseline: &Trajectory) -> Result<TaskMetrics, MetricsError> {
    if traj.executed().is_empty() {
        return Ok(TaskMetrics {
            gain: 0.0,
            t_best: 1.0,
            t_stop: 0.0,
            p_total: 0.5,
            score: 0.0,
            aup_d: 0.0,
            best_result: None,
            best_normalized: 0.0,
            hit: false,
            completed: 0,
        });
    }
    let g = gain(traj)?;
    let tb = best_time(traj)?;
    let ts = stop_time(traj)?;
    let best = traj.best_found().expect("nonempty");
    Ok(TaskMetrics {
        gain: g,
        t_best: tb,
        t_stop: ts,
        p_total: p_total(tb, ts),
        score: task_score(g, tb, ts),
        aup_d: aup_d(traj, baseline)?,
        best_result: Some(best),
        best_normalized: 1.0 / performance_ratio(best, traj)?,
        hit: traj.hit(),
        completed: traj.executed().len(),
    })
}

/// Fixed 4-decimal display; the exact binary value is rounded, ties to even.
pub fn display4(x: f64) -> String {
    format!("{x:.4}")
}
