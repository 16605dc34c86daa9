//! `run` and `resume`: one study executed in this process.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{read_err, write_err, CliError};
use crate::store::{self, study_dir, tabulated_metrics};
use selfai_core::agent::EndpointConfig;
use selfai_core::clock::SystemClock;
use selfai_core::config::parse_config;
use selfai_core::manager::events::{self, reopen};
use selfai_core::manager::orchestrator::consumed_replies;
use selfai_core::manager::setup::{build_solver, open_backend};
use selfai_core::manager::{BackendSpec, FileInbox, Orchestrator, RunOutcome, RunSpec, RunnerLock};
use selfai_core::metrics::{display4, TaskMetrics};
use selfai_core::solvers::SolverKind;
use selfai_core::Study;

#[derive(Debug, Clone)]
pub enum BackendChoice {
    Table {
        path: PathBuf,
        latency_ms: u64,
    },
    Command {
        command: String,
        /// Defaults to `<study dir>/work`.
        workdir: Option<PathBuf>,
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub solver: SolverKind,
    /// Overrides `SELFAI_ENDPOINT`.
    pub endpoint: Option<String>,
    pub seed: u64,
    pub slots: usize,
    pub supervised: bool,
    pub backend: Option<BackendChoice>,
    pub data: PathBuf,
    pub id: Option<String>,
    pub n_jobs: Option<usize>,
    pub playbook: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>, solver: SolverKind) -> Self {
        Self {
            config: config.into(),
            solver,
            endpoint: None,
            seed: 0,
            slots: 1,
            supervised: false,
            backend: None,
            data: PathBuf::from("data/studies"),
            id: None,
            n_jobs: None,
            playbook: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub id: String,
    pub dir: PathBuf,
    pub outcome: RunOutcome,
    pub study: Study,
    pub metrics: Option<TaskMetrics>,
}

impl RunReport {
    /// Two lines: what happened to the study, then its metrics.
    pub fn render(&self) -> String {
        let (state, word) = match self.outcome {
            RunOutcome::Finished(l) => (l, "finished"),
            RunOutcome::Suspended(l) => (l, "suspended"),
        };
        let state = serde_json::to_value(state)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let mut out = format!(
            "study {} {word} ({state}): {} completed of {} configs\n",
            self.id,
            self.study.completed_count(),
            self.study.space.cardinality()
        );
        match &self.metrics {
            Some(m) => out.push_str(&format!(
                "score {} aup_d {} best_time {} stop_time {} best_result {} hit {}\n",
                display4(m.score),
                display4(m.aup_d),
                display4(m.t_best),
                display4(m.t_stop),
                m.best_result.map(display4).unwrap_or_else(|| "-".into()),
                m.hit
            )),
            None => {
                let best = self.study.best().and_then(|t| t.value);
                out.push_str(&format!(
                    "best_result {}\n",
                    best.map(display4).unwrap_or_else(|| "-".into())
                ));
            }
        }
        out
    }
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(read_err(path))
}

fn default_id(opts: &RunOptions) -> String {
    let stem = match &opts.backend {
        Some(BackendChoice::Table { path, .. }) => path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| store::valid_id(s))
            .unwrap_or("study")
            .to_string(),
        _ => "study".to_string(),
    };
    let base = format!("{stem}-{}-{}", opts.solver.as_str(), opts.seed);
    (1..)
        .map(|k| if k == 1 { base.clone() } else { format!("{base}-{k}") })
        .find(|id| !opts.data.join(id).exists())
        .expect("some suffix is free")
}

/// Creates a study from a config file and runs it until it stops, runs out
/// of configs or is paused with nobody to resume it.
pub fn run_study(opts: &RunOptions) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(&opts.config).map_err(read_err(&opts.config))?;
    let config = parse_config(&text)?;
    let id = match &opts.id {
        Some(id) => id.clone(),
        None => default_id(opts),
    };
    let dir = study_dir(&opts.data, &id)?;
    let backend = match opts.backend.as_ref().ok_or(CliError::NoBackend)? {
        BackendChoice::Table { path, latency_ms } => BackendSpec::Tabulated {
            table: absolute(path)?,
            latency_ms: *latency_ms,
        },
        BackendChoice::Command {
            command,
            workdir,
            timeout_secs,
        } => BackendSpec::Subprocess {
            command: command.clone(),
            workdir: workdir.clone().unwrap_or_else(|| dir.join("work")),
            timeout_secs: *timeout_secs,
        },
    };
    let run = RunSpec {
        solver: opts.solver,
        seed: opts.seed,
        slots: opts.slots.max(1),
        supervised: opts.supervised,
        backend,
        agent: None,
        playbook: opts.playbook.as_deref().map(absolute).transpose()?,
        initial: config.seed_numbers(),
    };
    let header = config.header(&id, opts.solver.as_str(), opts.n_jobs);
    let backend = open_backend(&run.backend, &header.space)?;
    let endpoint = EndpointConfig::from_env(opts.endpoint.as_deref());
    let solver = build_solver(&run, endpoint, None, 0)?;

    fs::create_dir_all(&dir).map_err(write_err(&dir))?;
    let lock = RunnerLock::try_acquire(&dir)
        .map_err(write_err(&dir))?
        .ok_or_else(|| CliError::Busy(id.clone()))?;
    let log = dir.join("events.log");
    let writer = events::create(&log).map_err(|e| match e.kind() {
        std::io::ErrorKind::AlreadyExists => CliError::Busy(id.clone()),
        _ => write_err(&log)(e),
    })?;
    let inbox = FileInbox::attach(&dir);
    log::info!("study {id}: {} configs, solver {}", header.space.cardinality(), run.solver);
    let orch = Orchestrator::create(header, run, writer, solver, backend, Arc::new(SystemClock))?
        .with_control(Box::new(inbox));
    drive(orch, id, dir, lock)
}

/// Continues a study from its event log.
pub fn resume_study(data: &Path, id: &str, endpoint: Option<&str>) -> Result<RunReport, CliError> {
    let dir = study_dir(data, id)?;
    let log = dir.join("events.log");
    if !log.is_file() {
        return Err(CliError::NoStudy(id.to_string()));
    }
    let lock = RunnerLock::try_acquire(&dir)
        .map_err(write_err(&dir))?
        .ok_or_else(|| CliError::Busy(id.to_string()))?;
    let (replayed, writer) = reopen(&log)?;
    if let Some(t) = &replayed.torn_tail {
        log::warn!("study {id}: dropped a torn write of {} bytes at line {}", t.bytes, t.line);
    }
    let run = replayed.run.clone();
    let backend = open_backend(&run.backend, &replayed.study.space)?;
    let skip = consumed_replies(&replayed);
    let solver = build_solver(&run, EndpointConfig::from_env(endpoint), None, skip)?;
    let inbox = FileInbox::attach(&dir);
    let orch = Orchestrator::resume(replayed, writer, solver, backend, Arc::new(SystemClock))
        .with_control(Box::new(inbox));
    drive(orch, id.to_string(), dir, lock)
}

fn drive(
    mut orch: Orchestrator<fs::File>,
    id: String,
    dir: PathBuf,
    lock: RunnerLock,
) -> Result<RunReport, CliError> {
    let outcome = orch.run()?;
    let study = orch.study().clone();
    let run = orch.run_spec().clone();
    drop(orch);
    let replayed = events::replay_file(&dir.join("events.log"))?;
    store::write_reasoning(&dir, &replayed.records)?;
    drop(lock);
    let metrics = tabulated_metrics(&study, &run)?;
    Ok(RunReport {
        id,
        dir,
        outcome,
        study,
        metrics,
    })
}
