//! Studies on disk: `<data>/<id>/events.log` plus derived files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{read_err, write_err, CliError};
use selfai_core::agent::ReasoningRecord;
use selfai_core::manager::events::{self, log_path, replay_file, Replayed};
use selfai_core::manager::setup::check_table_covers;
use selfai_core::manager::{BackendSpec, EventPayload, EventRecord, RunSpec, Table};
use selfai_core::metrics::{evaluate, TaskMetrics, Trajectory};
use selfai_core::{Direction, Lifecycle, PendingStop, SearchSpace, Study, TrialConfig, TrialStatus};

pub const REASONING_FILE: &str = "reasoning.jsonl";

/// Ids become directory names, so only a conservative alphabet is allowed.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub fn study_dir(data: &Path, id: &str) -> Result<PathBuf, CliError> {
    if !valid_id(id) {
        return Err(CliError::BadId(id.to_string()));
    }
    Ok(data.join(id))
}

/// Ids of all studies under `data`, sorted.
pub fn study_ids(data: &Path) -> Result<Vec<String>, CliError> {
    let entries = match fs::read_dir(data) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(read_err(data)(e)),
    };
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(read_err(data))?;
        let Some(name) = entry.file_name().to_str().map(str::to_string) else {
            continue;
        };
        if valid_id(&name) && entry.path().join("events.log").is_file() {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn load(data: &Path, id: &str) -> Result<Replayed, CliError> {
    let dir = study_dir(data, id)?;
    let path = log_path(data, id);
    if !dir.join("events.log").is_file() {
        return Err(CliError::NoStudy(id.to_string()));
    }
    Ok(replay_file(&path)?)
}

/// The study as its log last described it, with running trials still
/// running. [`Replayed::study`] reverts them, which is right for resuming but
/// wrong for display.
pub fn live_view(replayed: &Replayed) -> Study {
    let mut study: Option<Study> = None;
    for rec in &replayed.records {
        match (&mut study, &rec.payload) {
            (None, EventPayload::StudyCreated { header, .. }) => {
                study = Study::new(header.clone()).ok();
            }
            (Some(s), _) => {
                if events::apply(s, rec).is_err() {
                    return replayed.study.clone();
                }
            }
            _ => {}
        }
    }
    study.unwrap_or_else(|| replayed.study.clone())
}

pub fn reasoning(records: &[EventRecord]) -> Vec<ReasoningRecord> {
    records
        .iter()
        .filter_map(|r| match &r.payload {
            EventPayload::ReasoningRecorded { record } => Some(record.clone()),
            _ => None,
        })
        .collect()
}

/// Rewrites `<dir>/reasoning.jsonl` from the event log.
pub fn write_reasoning(dir: &Path, records: &[EventRecord]) -> Result<PathBuf, CliError> {
    let path = dir.join(REASONING_FILE);
    let mut out = Vec::new();
    for r in reasoning(records) {
        serde_json::to_writer(&mut out, &r).expect("reasoning records serialize");
        out.push(b'\n');
    }
    let tmp = dir.join(format!("{REASONING_FILE}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(write_err(&tmp))?;
    f.write_all(&out).map_err(write_err(&tmp))?;
    f.sync_all().map_err(write_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(write_err(&path))?;
    Ok(path)
}

/// Grid-search trajectory over `space` in its own enumeration order, with
/// values looked up in `table`.
pub fn grid_trajectory(space: &SearchSpace, direction: Direction, table: &Table) -> Result<Trajectory, CliError> {
    check_table_covers(table, space)?;
    let values = space
        .enumerate()
        .iter()
        .map(|c| table.lookup(c).expect("coverage checked"))
        .collect();
    Ok(Trajectory::new(values, direction, table.stats()))
}

/// Metrics of a study backed by a table; `None` for subprocess studies,
/// whose value range is unknown.
pub fn tabulated_metrics(study: &Study, run: &RunSpec) -> Result<Option<TaskMetrics>, CliError> {
    let BackendSpec::Tabulated { table, .. } = &run.backend else {
        return Ok(None);
    };
    let table = Arc::new(Table::load(table)?);
    let baseline = grid_trajectory(&study.space, study.direction, &table)?;
    let traj = Trajectory::from_study(study, table.stats());
    Ok(Some(evaluate(&traj, &baseline)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct BestTrial {
    pub number: usize,
    pub ordinal: Option<usize>,
    pub value: f64,
    pub config: TrialConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub id: String,
    pub lifecycle: Lifecycle,
    pub solver: String,
    pub direction: Direction,
    pub metric: String,
    pub cardinality: usize,
    pub max_trials: usize,
    pub n_jobs: usize,
    pub completed: usize,
    pub failed: usize,
    pub in_flight: usize,
    pub round: u32,
    pub best: Option<BestTrial>,
}

pub fn summary(study: &Study) -> StudySummary {
    let count = |s: TrialStatus| study.trials.iter().filter(|t| t.status == s).count();
    StudySummary {
        id: study.id.clone(),
        lifecycle: study.lifecycle,
        solver: study.solver.clone(),
        direction: study.direction,
        metric: study.metric.clone(),
        cardinality: study.space.cardinality(),
        max_trials: study.max_trials,
        n_jobs: study.n_jobs,
        completed: count(TrialStatus::Completed),
        failed: count(TrialStatus::Failed),
        in_flight: count(TrialStatus::Pending) + count(TrialStatus::Running),
        round: study.round,
        best: study.best().map(|t| BestTrial {
            number: t.number,
            ordinal: t.ordinal,
            value: t.value.expect("best trial is completed"),
            config: t.config.clone(),
        }),
    }
}

/// Everything a live view of one study needs.
#[derive(Debug, Clone, Serialize)]
pub struct StudyDetail {
    #[serde(flatten)]
    pub summary: StudySummary,
    pub space: SearchSpace,
    pub system_context: String,
    pub pending_stop: Option<PendingStop>,
    /// `(ordinal, best value so far)` after each completed trial.
    pub best_so_far: Vec<(usize, f64)>,
    /// Phase of the last model call, if the solver is an agent.
    pub last_phase: Option<String>,
    pub last_seq: u64,
}

pub fn detail(study: &Study, records: &[EventRecord]) -> StudyDetail {
    let mut best: Option<f64> = None;
    let best_so_far = study
        .values()
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let b = match best {
                Some(b) if !study.direction.is_better(v, b) => b,
                _ => v,
            };
            best = Some(b);
            (i + 1, b)
        })
        .collect();
    let last_phase = records.iter().rev().find_map(|r| match &r.payload {
        EventPayload::ReasoningRecorded { record } => serde_json::to_value(record.phase)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string)),
        _ => None,
    });
    StudyDetail {
        summary: summary(study),
        space: study.space.clone(),
        system_context: study.system_context.clone(),
        pending_stop: study.pending_stop.clone(),
        best_so_far,
        last_phase,
        last_seq: records.last().map(|r| r.seq).unwrap_or(0),
    }
}
