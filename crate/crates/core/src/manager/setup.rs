//! Turning a [`RunSpec`] into a live solver and backend.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use super::backend::{Backend, SubprocessBackend, TabulatedBackend};
use super::events::{BackendSpec, RunSpec};
use super::table::Table;
use crate::agent::{
    AgentConfig, AgentMode, ChatClient, CognitiveAgent, EndpointConfig, HttpTransport, RateLimiter,
    RetryConfig, ScriptedTransport,
};
use crate::model::SearchSpace;
use crate::solvers::{classical, Solver, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("table does not fit the study: {0}")]
    TableMismatch(String),
    #[error("solver `{0}` needs a model endpoint or a playbook")]
    NoEndpoint(SolverKind),
    #[error("playbook {path}: {reason}")]
    Playbook { path: PathBuf, reason: String },
}

/// Checks that `table` holds a value for every config of `space`, whatever
/// the order of dimensions and values.
pub fn check_table_covers(table: &Table, space: &SearchSpace) -> Result<(), SetupError> {
    if table.space.cardinality() != space.cardinality() {
        return Err(SetupError::TableMismatch(format!(
            "table has {} configs, study space has {}",
            table.space.cardinality(),
            space.cardinality()
        )));
    }
    for dim in space.dimensions() {
        let Some(td) = table.space.dimension(&dim.name) else {
            return Err(SetupError::TableMismatch(format!("no column `{}`", dim.name)));
        };
        for v in &dim.values {
            if td.position(v).is_none() {
                return Err(SetupError::TableMismatch(format!(
                    "`{}` has no rows with value {v}",
                    dim.name
                )));
            }
        }
    }
    Ok(())
}

pub fn open_backend(spec: &BackendSpec, space: &SearchSpace) -> Result<Arc<dyn Backend>, SetupError> {
    match spec {
        BackendSpec::Tabulated { table, latency_ms } => {
            let t = Table::load(table).map_err(|e| SetupError::BackendUnavailable(e.to_string()))?;
            check_table_covers(&t, space)?;
            Ok(Arc::new(TabulatedBackend::new(
                Arc::new(t),
                Duration::from_millis(*latency_ms),
            )))
        }
        BackendSpec::Subprocess {
            command,
            workdir,
            timeout_secs,
        } => {
            let b = SubprocessBackend::new(
                command.clone(),
                workdir.clone(),
                Duration::from_secs(*timeout_secs),
                space,
            )
            .map_err(|e| SetupError::BackendUnavailable(e.to_string()))?;
            Ok(Arc::new(b))
        }
    }
}

/// Agent settings for `kind`, starting from the ones stored in the run.
pub fn agent_config(run: &RunSpec) -> AgentConfig {
    let mut config = run.agent.clone().unwrap_or_default();
    match run.solver {
        SolverKind::Cognitive => config.mode = AgentMode::Cognitive,
        SolverKind::Llm => config.mode = AgentMode::Llm,
        SolverKind::LlmEs => config.mode = AgentMode::LlmEs,
        _ => {}
    }
    config
}

/// Builds the solver of `run`. A playbook takes precedence over `endpoint`;
/// `skip_replies` playbook entries are treated as already used.
pub fn build_solver(
    run: &RunSpec,
    endpoint: Option<EndpointConfig>,
    limiter: Option<Arc<RateLimiter>>,
    skip_replies: usize,
) -> Result<Box<dyn Solver>, SetupError> {
    if let Some(s) = classical(run.solver) {
        return Ok(s);
    }
    let mut config = agent_config(run);
    let client = match (&run.playbook, endpoint) {
        (Some(path), _) => {
            let mut t = ScriptedTransport::from_file(path).map_err(|e| SetupError::Playbook {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            t.advance(skip_replies);
            ChatClient::new(Box::new(t))
        }
        (None, Some(ep)) if run.solver != SolverKind::Scripted => {
            config.model = ep.model.clone();
            let mut c = ChatClient::new(Box::new(HttpTransport::new(ep))).with_retry(RetryConfig::default());
            if let Some(l) = limiter {
                c = c.with_limiter(l);
            }
            c
        }
        _ => return Err(SetupError::NoEndpoint(run.solver)),
    };
    Ok(Box::new(CognitiveAgent::new(config, client)))
}
