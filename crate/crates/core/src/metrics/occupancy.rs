use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Trial counts below the low threshold, above the high threshold, and overall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub low: usize,
    pub high: usize,
    pub total: usize,
}

/// Linear-interpolation quantile of `values` (the usual "type 7" estimator).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// How many trials landed in the bottom and top regions of the table, with
/// thresholds taken as quantiles of the full table.
pub fn region_occupancy(
    trajectory: &[f64],
    table: &[f64],
    low_quantile: f64,
    high_quantile: f64,
) -> Result<Occupancy, MetricsError> {
    if !(0.0 < low_quantile && low_quantile < high_quantile && high_quantile < 1.0) {
        return Err(MetricsError::BadQuantiles);
    }
    if trajectory.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let lo = quantile(table, low_quantile).ok_or(MetricsError::EmptyTrajectory)?;
    let hi = quantile(table, high_quantile).ok_or(MetricsError::EmptyTrajectory)?;
    Ok(Occupancy {
        low: trajectory.iter().filter(|&&v| v < lo).count(),
        high: trajectory.iter().filter(|&&v| v > hi).count(),
        total: trajectory.len(),
    })
}
