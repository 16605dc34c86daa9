use std::io;
use std::path::PathBuf;

use selfai_core::config::{ConfigError, DraftError};
use selfai_core::manager::events::ReplayError;
use selfai_core::manager::setup::SetupError;
use selfai_core::manager::table::TableError;
use selfai_core::manager::OrchestratorError;
use selfai_core::metrics::MetricsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Draft(#[from] DraftError),
    #[error("no backend given; pass --table or --command")]
    NoBackend,
    #[error("study `{0}` is being run by another process")]
    Busy(String),
    #[error("invalid study id `{0}`")]
    BadId(String),
    #[error("study `{0}` has no event log")]
    NoStudy(String),
    #[error("suite {path}: {reason}")]
    Suite { path: PathBuf, reason: String },
    #[error("no model endpoint; pass --endpoint or set SELFAI_ENDPOINT")]
    NoEndpoint,
    #[error("SELFAI_API_TOKEN is not set")]
    NoToken,
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: io::Error },
    #[error("service failed: {0}")]
    Serve(io::Error),
}

pub(crate) fn read_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Read { path, source }
}

pub(crate) fn write_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Write { path, source }
}
