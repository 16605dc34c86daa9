//! Performance ratios, performance profiles and the diversity measure AUP_D.
//!
//! Each completed trial gets a ratio `r >= 1` against the table optimum
//! (`max/v` when maximizing, `v/min` when minimizing), with all of a task's
//! values shifted by `1 - min` first when the table reaches zero or below.
//! The profile `rho(tau)` counts trials with `r >= tau` and is integrated as a
//! right-continuous step function over the sorted unique ratios:
//!
//! ```text
//! A = sum rho_k (tau_{k+1} - tau_k)
//! G = (1/A) sum rho_k (tau_{k+1}^2 - tau_k^2) / 2
//! S = sum rho_k (tau_{k+1}^4 - tau_k^4) / (4 G^3)
//! S' = (tanh(1 - (S - S_base) / S_base) + 1) / 2
//! AUP_D = (A / S') / (A_base / S'_base)
//! ```
//!
//! where the `base` quantities come from the grid-search trajectory on the
//! same task, so the baseline always reports exactly 1.

use serde::{Deserialize, Serialize};

use super::{MetricsError, Trajectory};
use crate::model::Direction;

fn shift(traj: &Trajectory) -> f64 {
    if traj.space_min <= 0.0 {
        1.0 - traj.space_min
    } else {
        0.0
    }
}

/// Ratio of an optimum to a value (or the reverse when minimizing). Both
/// must be positive.
pub fn ratio_against(value: f64, optimum: f64, direction: Direction) -> Result<f64, MetricsError> {
    if value <= 0.0 {
        return Err(MetricsError::NonPositiveDomain(value));
    }
    if optimum <= 0.0 {
        return Err(MetricsError::NonPositiveDomain(optimum));
    }
    Ok(match direction {
        Direction::Maximize => optimum / value,
        Direction::Minimize => value / optimum,
    })
}

/// Ratio of `value` against the task optimum of `traj`, after the task shift.
pub fn performance_ratio(value: f64, traj: &Trajectory) -> Result<f64, MetricsError> {
    let s = shift(traj);
    ratio_against(value + s, traj.global_best + s, traj.direction)
}

pub fn ratios(traj: &Trajectory) -> Result<Vec<f64>, MetricsError> {
    traj.executed()
        .iter()
        .map(|&v| performance_ratio(v, traj))
        .collect()
}

/// Step function over sorted unique thresholds; `counts[k] = rho(taus[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub taus: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Profile {
    pub fn from_ratios(rs: &[f64]) -> Self {
        let mut taus = rs.to_vec();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let counts = taus
            .iter()
            .map(|&tau| rs.iter().filter(|&&r| r >= tau).count())
            .collect();
        Self { taus, counts }
    }

    /// Step value at `x`: `rho` of the largest threshold not above `x`.
    pub fn at(&self, x: f64) -> usize {
        match self.taus.iter().rposition(|&t| t <= x) {
            Some(k) => self.counts[k],
            // Left of the support every trial qualifies.
            None => self.counts.first().copied().unwrap_or(0),
        }
    }

    pub fn points(&self) -> Vec<(f64, usize)> {
        self.taus.iter().copied().zip(self.counts.iter().copied()).collect()
    }
}

pub fn performance_profile(traj: &Trajectory) -> Result<Profile, MetricsError> {
    if traj.executed().is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    Ok(Profile::from_ratios(&ratios(traj)?))
}

/// Area, centroid and skewness of a profile. All zero on a zero-width support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMoments {
    pub area: f64,
    pub centroid: f64,
    pub skewness: f64,
}

pub fn profile_moments(profile: &Profile) -> ProfileMoments {
    let segments = || {
        profile
            .taus
            .windows(2)
            .zip(&profile.counts)
            .map(|(w, &c)| (w[0], w[1], c as f64))
    };
    let area: f64 = segments().map(|(a, b, c)| c * (b - a)).sum();
    if area <= 0.0 {
        return ProfileMoments {
            area: 0.0,
            centroid: 0.0,
            skewness: 0.0,
        };
    }
    let first: f64 = segments().map(|(a, b, c)| c * (b * b - a * a) / 2.0).sum();
    let centroid = first / area;
    let g3 = centroid.powi(3);
    let skewness: f64 = segments()
        .map(|(a, b, c)| c * (b.powi(4) - a.powi(4)) / (4.0 * g3))
        .sum();
    ProfileMoments {
        area,
        centroid,
        skewness,
    }
}

fn raw_aup(m: &ProfileMoments, s_base: f64) -> f64 {
    if m.area == 0.0 {
        return 0.0;
    }
    let s_norm = 1.0 - (m.skewness - s_base) / s_base;
    let s_prime = (s_norm.tanh() + 1.0) / 2.0;
    m.area / s_prime
}

/// Area under the performance-diversity curve of `traj`, relative to the
/// grid-search `baseline` on the same task.
///
/// A trajectory whose trials are all optimal has zero-width support and
/// scores 0. When the baseline itself is degenerate (a constant table) an
/// equally degenerate trajectory scores 1.
pub fn aup_d(traj: &Trajectory, baseline: &Trajectory) -> Result<f64, MetricsError> {
    let t = profile_moments(&performance_profile(traj)?);
    let b = profile_moments(&performance_profile(baseline)?);
    if b.area == 0.0 {
        return if t.area == 0.0 {
            Ok(1.0)
        } else {
            Err(MetricsError::DegenerateBaseline)
        };
    }
    Ok(raw_aup(&t, b.skewness) / raw_aup(&b, b.skewness))
}
