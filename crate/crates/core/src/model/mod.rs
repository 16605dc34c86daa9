//! Domain types shared by every other module: the discrete search space,
//! trial records, the study and its lifecycle state machine, and solver
//! decisions.

mod decision;
mod space;
mod study;

pub use decision::{SolverDecision, Suggestion};
pub use space::{format_config, space_from, Dimension, Scalar, SearchSpace, TrialConfig};
pub use study::{
    event_name, Direction, Lifecycle, LifecycleEvent, PendingStop, Study, StudyHeader,
    TrialRecord, TrialStatus,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("search space has no dimensions")]
    EmptySpace,
    #[error("dimension `{0}` has no values")]
    EmptyDimension(String),
    #[error("dimension `{0}` is declared twice")]
    DuplicateDimension(String),
    #[error("dimension `{dimension}` lists `{value}` twice")]
    DuplicateValue { dimension: String, value: String },
    #[error("dimension `{0}` has a non-finite value")]
    NonFiniteValue(String),
    #[error("`{0}` is not a dimension of the search space")]
    UnknownDimension(String),
    #[error("missing dimension `{0}`")]
    MissingDimension(String),
    #[error("`{value}` is not a candidate of dimension `{dimension}`")]
    ValueNotInSpace { dimension: String, value: String },
    #[error("illegal lifecycle transition `{event}` from {from:?}")]
    IllegalTransition { from: Lifecycle, event: &'static str },
    #[error("invalid adjustment: {0}")]
    InvalidAdjustment(String),
    #[error("no trial with config number {0}")]
    UnknownTrial(usize),
    #[error("config number {0} already has a trial")]
    DuplicateTrial(usize),
    #[error("trial {number} is {status:?}")]
    BadTrialState { number: usize, status: TrialStatus },
    #[error("trial {0} produced a non-finite objective")]
    NonFiniteObjective(usize),
}
