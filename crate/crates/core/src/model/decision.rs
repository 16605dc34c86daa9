use serde::{Deserialize, Serialize};

use super::space::TrialConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub number: usize,
    pub config: TrialConfig,
}

/// What a solver wants next: more trials, or to end the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverDecision {
    Suggest {
        suggestions: Vec<Suggestion>,
        rationale: String,
        /// Which policy produced the picks (`"tpe"`, `"cognitive"`, `"seed"`,
        /// `"tpe-fallback"`, ...). Copied onto each submitted trial.
        origin: String,
    },
    Stop {
        confidence: f64,
        rationale: String,
    },
}

impl SolverDecision {
    pub fn suggest(suggestions: Vec<Suggestion>, origin: impl Into<String>) -> Self {
        SolverDecision::Suggest {
            suggestions,
            rationale: String::new(),
            origin: origin.into(),
        }
    }

    pub fn stop(confidence: f64, rationale: impl Into<String>) -> Self {
        SolverDecision::Stop {
            confidence: confidence.clamp(0.0, 1.0),
            rationale: rationale.into(),
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, SolverDecision::Stop { .. })
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        match self {
            SolverDecision::Suggest { suggestions, .. } => suggestions,
            SolverDecision::Stop { .. } => &[],
        }
    }
}
