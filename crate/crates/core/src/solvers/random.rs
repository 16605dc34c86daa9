use rand::seq::index;

use super::{Solver, SolverContext, SolverError};
use crate::agent::TraceSink;
use crate::model::{SolverDecision, Suggestion};

/// Uniform sampling without replacement from the unexplored configs.
#[derive(Debug, Default, Clone, Copy)]
pub struct RandomSolver;

/// `k` distinct entries of `pool`, uniformly, reproducible from `ctx`.
pub(crate) fn sample_unexplored(ctx: &SolverContext<'_>, pool: &[usize], k: usize) -> Vec<usize> {
    let k = k.min(pool.len());
    let mut rng = ctx.rng();
    index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

impl Solver for RandomSolver {
    fn name(&self) -> &str {
        "random"
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
        let space = &ctx.study.space;
        let picks = sample_unexplored(ctx, &pool, ctx.requested.max(1))
            .into_iter()
            .map(|number| Suggestion {
                number,
                config: space.config_at(number).expect("in range"),
            })
            .collect();
        Ok(SolverDecision::suggest(picks, "random"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::StepClock;
    use crate::model::Direction;
    use crate::solvers::testing::{grid_study, record};

    #[test]
    fn never_repeats_and_is_reproducible() {
        let clock = StepClock::new(0, 1);
        let mut s = grid_study(&[3, 3], Direction::Maximize);
        let mut seen = Vec::new();
        while !s.unexplored().is_empty() {
            let ctx = SolverContext {
                study: &s,
                requested: 2,
                seed: 9,
                clock: &clock,
            };
            let d1 = RandomSolver.decide(&ctx, &mut Vec::new()).unwrap();
            let d2 = RandomSolver.decide(&ctx, &mut Vec::new()).unwrap();
            assert_eq!(d1, d2);
            let picks: Vec<usize> = d1.suggestions().iter().map(|p| p.number).collect();
            for n in picks {
                assert!(!seen.contains(&n));
                seen.push(n);
                record(&mut s, n, 0.0);
            }
        }
        assert_eq!(seen.len(), 9);
    }
}
