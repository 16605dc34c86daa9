//! The per-study event log and the fold that turns it back into a [`Study`].
//!
//! One JSON record per line, `seq` starting at 1 with no gaps. The log is the
//! only persistent state of a study; the orchestrator applies each event to
//! its in-memory study with the same [`apply`] used by [`replay`], so a
//! replayed study is exactly the one the writer held.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, ReasoningRecord};
use crate::model::{
    Lifecycle, LifecycleEvent, ModelError, SolverDecision, Study, StudyHeader, TrialStatus,
};
use crate::solvers::SolverKind;

/// Where trial values come from. Stored in the log so a study can resume
/// without its original command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Tabulated {
        table: PathBuf,
        #[serde(default)]
        latency_ms: u64,
    },
    Subprocess {
        command: String,
        workdir: PathBuf,
        timeout_secs: u64,
    },
}

/// How a study is run. Holds no endpoint or credential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub solver: SolverKind,
    pub seed: u64,
    /// Concurrent execution slots.
    pub slots: usize,
    /// Stop verdicts wait for a human when set.
    pub supervised: bool,
    pub backend: BackendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentConfig>,
    /// Scripted replies used instead of a live endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playbook: Option<PathBuf>,
    /// Config numbers submitted before the solver is first consulted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    StudyCreated {
        header: StudyHeader,
        run: RunSpec,
    },
    TrialSubmitted {
        number: usize,
        origin: String,
    },
    TrialStarted {
        number: usize,
        worker: usize,
        attempt: u32,
    },
    TrialCompleted {
        number: usize,
        ordinal: usize,
        value: f64,
    },
    TrialFailed {
        number: usize,
        attempt: u32,
        reason: String,
        permanent: bool,
    },
    /// Lifecycle moves and budget adjustments, with who asked for them.
    LifecycleChanged {
        event: LifecycleEvent,
        from: Lifecycle,
        to: Lifecycle,
        cause: String,
    },
    SolverDecisionRecorded {
        round: u32,
        decision: SolverDecision,
    },
    ReasoningRecorded {
        record: ReasoningRecord,
    },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::StudyCreated { .. } => "study_created",
            EventPayload::TrialSubmitted { .. } => "trial_submitted",
            EventPayload::TrialStarted { .. } => "trial_started",
            EventPayload::TrialCompleted { .. } => "trial_completed",
            EventPayload::TrialFailed { .. } => "trial_failed",
            EventPayload::LifecycleChanged { .. } => "lifecycle_changed",
            EventPayload::SolverDecisionRecorded { .. } => "solver_decision_recorded",
            EventPayload::ReasoningRecorded { .. } => "reasoning_recorded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    /// Milliseconds from the run's clock.
    pub ts: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, thiserror::Error)]
pub enum FoldError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("study_created may only be the first event")]
    SecondCreation,
    #[error("trial {number} completed as ordinal {found}, expected {expected}")]
    OrdinalMismatch {
        number: usize,
        expected: usize,
        found: usize,
    },
    #[error("lifecycle event lands in {actual:?}, log says {logged:?}")]
    LifecycleMismatch { logged: Lifecycle, actual: Lifecycle },
}

/// Applies one non-creation event to `study`.
pub fn apply(study: &mut Study, record: &EventRecord) -> Result<(), FoldError> {
    let at = record.ts;
    match &record.payload {
        EventPayload::StudyCreated { .. } => return Err(FoldError::SecondCreation),
        EventPayload::TrialSubmitted { number, origin } => study.submit(*number, origin, at)?,
        EventPayload::TrialStarted { number, worker, .. } => {
            // A start for a trial that is still running means the earlier
            // attempt died with the process that ran it.
            if study.trial(*number).map(|t| t.status) == Some(TrialStatus::Running) {
                study.revert_trial(*number);
            }
            study.start(*number, *worker, at)?;
        }
        EventPayload::TrialCompleted {
            number,
            ordinal,
            value,
        } => {
            let expected = study.complete(*number, *value, at)?;
            if expected != *ordinal {
                return Err(FoldError::OrdinalMismatch {
                    number: *number,
                    expected,
                    found: *ordinal,
                });
            }
        }
        EventPayload::TrialFailed {
            number,
            reason,
            permanent,
            ..
        } => study.fail(*number, reason, *permanent, at)?,
        EventPayload::LifecycleChanged { event, to, .. } => {
            study.transition(event)?;
            if study.lifecycle != *to {
                return Err(FoldError::LifecycleMismatch {
                    logged: *to,
                    actual: study.lifecycle,
                });
            }
        }
        EventPayload::SolverDecisionRecorded { round, decision } => {
            study.record_decision(*round, decision)
        }
        EventPayload::ReasoningRecorded { .. } => {}
    }
    Ok(())
}

/// Appends records as lines. Each record goes out in a single write followed
/// by a flush, so a crash leaves at most one partial line at the end.
pub struct EventWriter<W: Write> {
    out: W,
    next_seq: u64,
}

impl<W: Write> EventWriter<W> {
    pub fn new(out: W, next_seq: u64) -> Self {
        Self { out, next_seq }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Numbers the payload without writing it.
    pub fn stamp(&self, ts: u64, payload: EventPayload) -> EventRecord {
        EventRecord {
            seq: self.next_seq,
            ts,
            payload,
        }
    }

    pub fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        if record.seq != self.next_seq {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("record seq {} but writer is at {}", record.seq, self.next_seq),
            ));
        }
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.out.flush()?;
        self.next_seq += 1;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("the log holds no study_created record")]
    NoStudyCreated,
    #[error("line {line} is corrupt: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("expected seq {expected} on line {line}, found {found}")]
    SeqGap {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("event {seq}: {source}")]
    Fold { seq: u64, source: FoldError },
}

/// A partial final line dropped during replay.
#[derive(Debug, Clone, PartialEq)]
pub struct TornTail {
    pub line: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone)]
pub struct Replayed {
    /// Trials that were running when the log ended are back to Pending.
    pub study: Study,
    pub run: RunSpec,
    pub records: Vec<EventRecord>,
    pub torn_tail: Option<TornTail>,
    /// Length of the intact prefix in bytes.
    pub valid_len: u64,
    pub next_seq: u64,
}

/// Folds a log held in memory.
///
/// A last line that lacks its newline or does not parse is a torn write and
/// is dropped with a warning. A bad line anywhere else, or a numbering gap,
/// is an error.
pub fn replay(bytes: &[u8]) -> Result<Replayed, ReplayError> {
    let mut records: Vec<EventRecord> = Vec::new();
    let mut torn_tail = None;
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let is_last = offset + line.len() + usize::from(complete) >= bytes.len();
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<EventRecord>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(rec) if complete => {
                let expected = records.len() as u64 + 1;
                if rec.seq != expected {
                    return Err(ReplayError::SeqGap {
                        line: line_no,
                        expected,
                        found: rec.seq,
                    });
                }
                records.push(rec);
                offset += line.len() + 1;
            }
            Ok(_) => {
                torn_tail = Some(TornTail {
                    line: line_no,
                    bytes: line.len(),
                });
                break;
            }
            Err(reason) => {
                if is_last {
                    torn_tail = Some(TornTail {
                        line: line_no,
                        bytes: line.len(),
                    });
                    break;
                }
                return Err(ReplayError::Corrupt {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    if let Some(t) = &torn_tail {
        log::warn!(
            "event log: dropping {} bytes of a partial record on line {}",
            t.bytes,
            t.line
        );
    }

    let mut iter = records.iter();
    let (mut study, run) = match iter.next().map(|r| &r.payload) {
        Some(EventPayload::StudyCreated { header, run }) => (
            Study::new(header.clone()).map_err(|e| ReplayError::Fold {
                seq: 1,
                source: e.into(),
            })?,
            run.clone(),
        ),
        _ => return Err(ReplayError::NoStudyCreated),
    };
    for rec in iter {
        apply(&mut study, rec).map_err(|source| ReplayError::Fold {
            seq: rec.seq,
            source,
        })?;
    }
    study.revert_running();
    let next_seq = records.len() as u64 + 1;
    Ok(Replayed {
        study,
        run,
        records,
        torn_tail,
        valid_len: offset as u64,
        next_seq,
    })
}

pub fn log_path(data_dir: &Path, study_id: &str) -> PathBuf {
    data_dir.join(study_id).join("events.log")
}

pub fn replay_file(path: &Path) -> Result<Replayed, ReplayError> {
    let bytes = std::fs::read(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    replay(&bytes)
}

/// Replays `path`, cuts off any torn tail, and opens it for appending.
pub fn reopen(path: &Path) -> Result<(Replayed, EventWriter<File>), ReplayError> {
    let replayed = replay_file(path)?;
    let io_err = |source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = OpenOptions::new().append(true).open(path).map_err(io_err)?;
    if replayed.torn_tail.is_some() {
        file.set_len(replayed.valid_len).map_err(io_err)?;
    }
    let writer = EventWriter::new(file, replayed.next_seq);
    Ok((replayed, writer))
}

/// Creates a fresh log; fails if one already exists.
pub fn create(path: &Path) -> io::Result<EventWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = OpenOptions::new().append(true).create_new(true).open(path)?;
    Ok(EventWriter::new(file, 1))
}
