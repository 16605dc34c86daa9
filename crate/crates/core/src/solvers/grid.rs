use super::{Solver, SolverContext, SolverError};
use crate::agent::TraceSink;
use crate::model::{SolverDecision, Suggestion};

/// Exhaustive search in enumeration order.
#[derive(Debug, Default, Clone, Copy)]
pub struct GridSolver;

impl Solver for GridSolver {
    fn name(&self) -> &str {
        "grid"
    }

    fn decide(
        &mut self,
        ctx: &SolverContext<'_>,
        _trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, SolverError> {
        let space = &ctx.study.space;
        let picks: Vec<Suggestion> = ctx
            .unexplored()
            .into_iter()
            .take(ctx.requested.max(1))
            .map(|number| Suggestion {
                number,
                config: space.config_at(number).expect("in range"),
            })
            .collect();
        if picks.is_empty() {
            return Ok(SolverDecision::stop(1.0, "every configuration has been tried"));
        }
        Ok(SolverDecision::suggest(picks, "grid"))
    }
}
