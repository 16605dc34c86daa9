//! Tree-structured Parzen estimator over purely categorical dimensions.
//!
//! Completed trials are split into a "good" top-`gamma` fraction and the
//! rest. Each dimension gets two smoothed categorical densities,
//! `l(v) = (count_good(v) + alpha) / (n_good + alpha * K)` and the same `g(v)`
//! over the bad set, and a candidate scores `prod_d l_d / g_d`. The solver is
//! stateless: every choice is a function of the study and the seed.

use serde::{Deserialize, Serialize};

use super::random::sample_unexplored;
use super::{Solver, SolverContext, SolverError};
use crate::agent::TraceSink;
use crate::model::{Direction, SearchSpace, SolverDecision, Suggestion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeParams {
    pub gamma: f64,
    pub alpha: f64,
    pub n_candidates: usize,
    pub n_startup: usize,
}

impl Default for TpeParams {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            alpha: 1.0,
            n_candidates: 24,
            n_startup: 5,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TpeSolver {
    pub params: TpeParams,
}

impl TpeSolver {
    pub fn new(params: TpeParams) -> Self {
        Self { params }
    }
}

/// Config numbers of the good and bad sets. Better values come first; equal
/// values are ordered by config number.
pub fn split_history(history: &[(usize, f64)], direction: Direction, gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let mut sorted = history.to_vec();
    sorted.sort_by(|a, b| {
        let by_value = match direction {
            Direction::Maximize => b.1.total_cmp(&a.1),
            Direction::Minimize => a.1.total_cmp(&b.1),
        };
        by_value.then(a.0.cmp(&b.0))
    });
    let n = sorted.len();
    let n_good = ((gamma * n as f64).ceil() as usize).clamp(1, n.saturating_sub(1).max(1));
    let numbers: Vec<usize> = sorted.iter().map(|p| p.0).collect();
    let (good, bad) = numbers.split_at(n_good.min(n));
    (good.to_vec(), bad.to_vec())
}

/// Per-dimension smoothed log-densities of `members`, indexed `[dim][value]`.
fn log_densities(space: &SearchSpace, members: &[usize], alpha: f64) -> Vec<Vec<f64>> {
    let dims = space.dimensions();
    let mut counts: Vec<Vec<f64>> = dims.iter().map(|d| vec![0.0; d.values.len()]).collect();
    for &m in members {
        let pos = space.positions_at(m).expect("in range");
        for (d, p) in pos.into_iter().enumerate() {
            counts[d][p] += 1.0;
        }
    }
    let n = members.len() as f64;
    counts
        .into_iter()
        .map(|c| {
            let k = c.len() as f64;
            c.into_iter().map(|x| ((x + alpha) / (n + alpha * k)).ln()).collect()
        })
        .collect()
}

/// `ln(prod_d l_d / g_d)` for each candidate.
pub fn log_scores(
    space: &SearchSpace,
    good: &[usize],
    bad: &[usize],
    alpha: f64,
    candidates: &[usize],
) -> Vec<(usize, f64)> {
    let l = log_densities(space, good, alpha);
    let g = log_densities(space, bad, alpha);
    candidates
        .iter()
        .map(|&c| {
            let pos = space.positions_at(c).expect("in range");
            let s = pos
                .iter()
                .enumerate()
                .map(|(d, &p)| l[d][p] - g[d][p])
                .sum();
            (c, s)
        })
        .collect()
}

/// Takes the `k` best scores. Scores within 1e-12 of the best count as tied
/// and the lowest config number wins.
fn top_k(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !scored.is_empty() {
        let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let (idx, _) = scored
            .iter()
            .enumerate()
            .filter(|(_, s)| s.1 >= best - 1e-12)
            .min_by_key(|(_, s)| s.0)
            .expect("nonempty");
        out.push(scored.swap_remove(idx).0);
    }
    out
}

impl Solver for TpeSolver {
    fn name(&self) -> &str {
        "tpe"
    }

    fn decide(
        &mut self,
        ctx: &SolverContext<'_>,
        _trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, SolverError> {
        let pool = ctx.unexplored();
        if pool.is_empty() {
            return Ok(SolverDecision::stop(1.0, "every configuration has been tried"));
        }
        let k = ctx.requested.max(1).min(pool.len());
        let history = ctx.history();
        let p = self.params;
        let numbers = if history.len() < p.n_startup.max(2) {
            sample_unexplored(ctx, &pool, k)
        } else {
            let (good, bad) = split_history(&history, ctx.study.direction, p.gamma);
            let candidates = if pool.len() <= p.n_candidates {
                pool
            } else {
                let mut c = sample_unexplored(ctx, &pool, p.n_candidates);
                c.sort_unstable();
                c
            };
            top_k(log_scores(&ctx.study.space, &good, &bad, p.alpha, &candidates), k)
        };
        let space = &ctx.study.space;
        let picks = numbers
            .into_iter()
            .map(|number| Suggestion {
                number,
                config: space.config_at(number).expect("in range"),
            })
            .collect();
        Ok(SolverDecision::suggest(picks, "tpe"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::StepClock;
    use crate::model::Study;
    use crate::solvers::testing::{grid_study, record};

    fn decide(study: &Study, seed: u64, requested: usize) -> Vec<usize> {
        let clock = StepClock::new(0, 1);
        let ctx = SolverContext {
            study,
            requested,
            seed,
            clock: &clock,
        };
        TpeSolver::default()
            .decide(&ctx, &mut Vec::new())
            .unwrap()
            .suggestions()
            .iter()
            .map(|s| s.number)
            .collect()
    }

    #[test]
    fn startup_is_seeded() {
        let s = grid_study(&[5, 5], Direction::Maximize);
        assert_eq!(decide(&s, 42, 1), decide(&s, 42, 1));
        let spread: std::collections::BTreeSet<Vec<usize>> =
            (0..20).map(|seed| decide(&s, seed, 1)).collect();
        assert!(spread.len() > 1);
    }

    #[test]
    fn one_left_is_forced() {
        let mut s = grid_study(&[2, 2], Direction::Maximize);
        for (n, v) in [(0, 1.0), (1, 2.0), (2, 3.0)] {
            record(&mut s, n, v);
        }
        assert_eq!(decide(&s, 1, 1), vec![3]);
    }

    #[test]
    fn split_respects_direction() {
        let h = [(0, 1.0), (1, 5.0), (2, 3.0), (3, 4.0)];
        assert_eq!(split_history(&h, Direction::Maximize, 0.25).0, vec![1]);
        assert_eq!(split_history(&h, Direction::Minimize, 0.25).0, vec![0]);
        assert_eq!(split_history(&h, Direction::Maximize, 0.5).0, vec![1, 3]);
    }

    #[test]
    fn prefers_the_good_region() {
        // Values peak at a=4, b=4; after startup the pick lands on a good value
        // in at least one dimension.
        let mut s = grid_study(&[5, 5], Direction::Maximize);
        for n in [0, 6, 12, 18, 24, 23, 19] {
            let pos = s.space.positions_at(n).unwrap();
            record(&mut s, n, (pos[0] + pos[1]) as f64);
        }
        let pick = decide(&s, 3, 1)[0];
        let pos = s.space.positions_at(pick).unwrap();
        assert!(pos[0] == 4 || pos[1] == 4, "pick {pick} at {pos:?}");
    }

    #[test]
    fn batch_is_distinct() {
        let mut s = grid_study(&[4, 4], Direction::Minimize);
        for n in 0..6 {
            record(&mut s, n, n as f64);
        }
        let picks = decide(&s, 0, 4);
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert!(picks.iter().all(|p| *p >= 6));
    }
}
