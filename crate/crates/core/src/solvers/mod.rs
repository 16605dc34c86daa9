//! Classical solvers behind the interface shared with the language-model agent.

mod grid;
mod random;
mod tpe;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use grid::GridSolver;
pub use random::RandomSolver;
pub use tpe::{TpeParams, TpeSolver};

use crate::agent::{AgentError, TraceSink};
use crate::clock::Clock;
use crate::model::{SolverDecision, Study};

/// Everything a solver may look at when deciding.
pub struct SolverContext<'a> {
    pub study: &'a Study,
    /// How many suggestions the orchestrator can use this round.
    pub requested: usize,
    pub seed: u64,
    pub clock: &'a dyn Clock,
}

impl<'a> SolverContext<'a> {
    /// `(number, value)` of completed trials in ordinal order.
    pub fn history(&self) -> Vec<(usize, f64)> {
        self.study
            .completed()
            .iter()
            .map(|t| (t.number, t.value.expect("completed")))
            .collect()
    }

    pub fn explored(&self) -> BTreeSet<usize> {
        self.study.explored()
    }

    pub fn unexplored(&self) -> Vec<usize> {
        self.study.unexplored()
    }

    /// Generator seeded from the run seed and the amount of history, so a
    /// solver that restarts mid-study makes the same choice it would have.
    pub fn rng(&self) -> ChaCha8Rng {
        let salt = (self.study.trials.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        ChaCha8Rng::seed_from_u64(self.seed ^ salt)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Agent(#[from] AgentError),
}

pub trait Solver: Send {
    fn name(&self) -> &str;

    fn decide(
        &mut self,
        ctx: &SolverContext<'_>,
        trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, SolverError>;
}

/// Solver names accepted on the command line and in suite files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Grid,
    Tpe,
    Random,
    Llm,
    LlmEs,
    Cognitive,
    Scripted,
}

impl SolverKind {
    pub fn is_agent(self) -> bool {
        matches!(
            self,
            SolverKind::Llm | SolverKind::LlmEs | SolverKind::Cognitive | SolverKind::Scripted
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Grid => "grid",
            SolverKind::Tpe => "tpe",
            SolverKind::Random => "random",
            SolverKind::Llm => "llm",
            SolverKind::LlmEs => "llm-es",
            SolverKind::Cognitive => "cognitive",
            SolverKind::Scripted => "scripted",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "grid" | "gs" => SolverKind::Grid,
            "tpe" | "bs" => SolverKind::Tpe,
            "random" => SolverKind::Random,
            "llm" => SolverKind::Llm,
            "llm-es" | "llm_es" => SolverKind::LlmEs,
            "cognitive" | "selfai" => SolverKind::Cognitive,
            "scripted" => SolverKind::Scripted,
            other => return Err(format!("unknown solver `{other}`")),
        })
    }
}

/// Classical solver for `kind`, or `None` for the agent-backed kinds.
pub fn classical(kind: SolverKind) -> Option<Box<dyn Solver>> {
    match kind {
        SolverKind::Grid => Some(Box::new(GridSolver)),
        SolverKind::Tpe => Some(Box::new(TpeSolver::default())),
        SolverKind::Random => Some(Box::new(RandomSolver)),
        _ => None,
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::model::{space_from, Direction, Scalar, Study, StudyHeader};

    pub fn grid_study(dims: &[usize], direction: Direction) -> Study {
        let names = ["a", "b", "c", "d", "e"];
        let spec: Vec<(&str, Vec<Scalar>)> = dims
            .iter()
            .enumerate()
            .map(|(i, &k)| (names[i], (0..k as i64).map(Scalar::Int).collect()))
            .collect();
        let space = space_from(&spec).unwrap();
        let card = space.cardinality();
        let mut s = Study::new(StudyHeader {
            id: "t".into(),
            space,
            direction,
            max_trials: card,
            n_jobs: 1,
            solver: "test".into(),
            system_context: String::new(),
            metric: "value".into(),
        })
        .unwrap();
        s.transition(&crate::model::LifecycleEvent::Start).unwrap();
        s
    }

    pub fn record(study: &mut Study, number: usize, value: f64) {
        study.submit(number, "test", 0).unwrap();
        study.start(number, 0, 0).unwrap();
        study.complete(number, value, 0).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trip() {
        for k in ["grid", "tpe", "random", "llm", "llm-es", "cognitive", "scripted"] {
            assert_eq!(k.parse::<SolverKind>().unwrap().as_str(), k);
        }
        assert!("nope".parse::<SolverKind>().is_err());
        assert!(SolverKind::LlmEs.is_agent());
        assert!(classical(SolverKind::Cognitive).is_none());
    }
}
