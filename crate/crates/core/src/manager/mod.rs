//! Study execution: tabulated and subprocess trials, the slot scheduler, the
//! event log with crash recovery, and out-of-process control.

pub mod backend;
pub mod control;
pub mod events;
mod knowledge;
pub mod orchestrator;
pub mod setup;
mod simulate;
pub mod table;

pub use backend::{Backend, SubprocessBackend, TabulatedBackend, TrialError, TrialJob};
pub use control::{ControlCommand, ControlSource, FileInbox, RunnerLock};
pub use events::{BackendSpec, EventPayload, EventRecord, EventWriter, Replayed, RunSpec};
pub use knowledge::knowledge_base_view;
pub use orchestrator::{Orchestrator, OrchestratorError, OrchestratorOptions, RunOutcome};
pub use simulate::{grid_baseline, simulate, Simulation, SimulationResult};
pub use table::{Table, TableMeta};
