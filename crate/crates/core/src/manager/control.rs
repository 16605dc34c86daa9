//! Steering a study from outside its runner.
//!
//! A running study holds `<study-dir>/runner.lock`. Commands for it are
//! appended to `<study-dir>/control.jsonl` and picked up by the runner on its
//! next poll. When no runner holds the lock, the command is applied directly
//! to the event log by [`apply_offline`].

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::Receiver;

use serde::{Deserialize, Serialize};

use super::events::{reopen, EventPayload, ReplayError};
use crate::clock::Clock;
use crate::model::{LifecycleEvent, ModelError, Study};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ControlCommand {
    Pause,
    Resume,
    Stop,
    StopOverride {
        approve: bool,
    },
    Configure {
        #[serde(default)]
        max_trials: Option<usize>,
        #[serde(default)]
        n_jobs: Option<usize>,
    },
}

impl ControlCommand {
    /// The lifecycle events this command stands for, in order.
    pub fn events(&self) -> Vec<LifecycleEvent> {
        match self {
            ControlCommand::Pause => vec![LifecycleEvent::Pause],
            ControlCommand::Resume => vec![LifecycleEvent::Resume],
            ControlCommand::Stop => vec![LifecycleEvent::Stop],
            ControlCommand::StopOverride { approve: true } => vec![LifecycleEvent::ApproveStop],
            ControlCommand::StopOverride { approve: false } => vec![LifecycleEvent::RejectStop],
            ControlCommand::Configure { max_trials, n_jobs } => max_trials
                .map(|m| LifecycleEvent::SetMaxTrials { max_trials: m })
                .into_iter()
                .chain(n_jobs.map(|n| LifecycleEvent::SetNJobs { n_jobs: n }))
                .collect(),
        }
    }

    /// Checks the whole command against `study` without changing it.
    pub fn check(&self, study: &Study) -> Result<(), ModelError> {
        let events = self.events();
        if events.is_empty() {
            return Err(ModelError::InvalidAdjustment("nothing to change".into()));
        }
        let mut probe = study.clone();
        for ev in &events {
            probe.transition(ev)?;
        }
        Ok(())
    }
}

/// Source of commands polled by the orchestrator between steps.
pub trait ControlSource: Send {
    fn poll(&mut self) -> Vec<ControlCommand>;
}

impl ControlSource for Receiver<ControlCommand> {
    fn poll(&mut self) -> Vec<ControlCommand> {
        self.try_iter().collect()
    }
}

pub fn inbox_path(study_dir: &Path) -> PathBuf {
    study_dir.join("control.jsonl")
}

pub fn lock_path(study_dir: &Path) -> PathBuf {
    study_dir.join("runner.lock")
}

/// Reads commands appended to `control.jsonl` since the last poll.
pub struct FileInbox {
    path: PathBuf,
    offset: u64,
}

impl FileInbox {
    /// Starts after whatever the inbox already holds; commands written while
    /// no runner was attached were applied offline.
    pub fn attach(study_dir: &Path) -> Self {
        let path = inbox_path(study_dir);
        let offset = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        Self { path, offset }
    }
}

impl ControlSource for FileInbox {
    fn poll(&mut self) -> Vec<ControlCommand> {
        let Ok(mut f) = File::open(&self.path) else {
            return Vec::new();
        };
        if f.seek(SeekFrom::Start(self.offset)).is_err() {
            return Vec::new();
        }
        let mut buf = String::new();
        if f.read_to_string(&mut buf).is_err() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut consumed = 0usize;
        for line in buf.split_inclusive('\n') {
            if !line.ends_with('\n') {
                break;
            }
            consumed += line.len();
            match serde_json::from_str::<ControlCommand>(line.trim()) {
                Ok(c) => out.push(c),
                Err(e) => log::warn!("control inbox: skipping bad line: {e}"),
            }
        }
        self.offset += consumed as u64;
        out
    }
}

/// Appends one command to a study's inbox.
pub fn enqueue(study_dir: &Path, command: &ControlCommand) -> io::Result<()> {
    let mut line = serde_json::to_vec(command).map_err(io::Error::other)?;
    line.push(b'\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(inbox_path(study_dir))?;
    f.write_all(&line)
}

/// Exclusive claim on a study directory, released on drop.
#[derive(Debug)]
pub struct RunnerLock {
    _file: File,
}

impl RunnerLock {
    /// `Ok(None)` when another process holds the lock.
    pub fn try_acquire(study_dir: &Path) -> io::Result<Option<RunnerLock>> {
        std::fs::create_dir_all(study_dir)?;
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(lock_path(study_dir))?;
        match file.try_lock() {
            Ok(()) => Ok(Some(RunnerLock { _file: file })),
            Err(std::fs::TryLockError::WouldBlock) => Ok(None),
            Err(std::fs::TryLockError::Error(e)) => Err(e),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("{0}")]
    Rejected(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("study is being run by another process")]
    Busy,
}

/// Applies `command` straight to the log of a study nobody is running.
/// Returns the study after the change.
pub fn apply_offline(
    study_dir: &Path,
    command: &ControlCommand,
    clock: &dyn Clock,
) -> Result<Study, ControlError> {
    let _lock = RunnerLock::try_acquire(study_dir)?.ok_or(ControlError::Busy)?;
    let (replayed, mut writer) = reopen(&study_dir.join("events.log"))?;
    let mut study = replayed.study;
    command.check(&study)?;
    for ev in command.events() {
        let from = study.lifecycle;
        study.transition(&ev)?;
        let rec = writer.stamp(
            clock.now_ms(),
            EventPayload::LifecycleChanged {
                event: ev,
                from,
                to: study.lifecycle,
                cause: "control".into(),
            },
        );
        writer.append(&rec)?;
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::StepClock;
    use crate::manager::events::{create, replay_file, BackendSpec, RunSpec};
    use crate::model::{space_from, Direction, Lifecycle, Scalar, StudyHeader};
    use crate::solvers::SolverKind;

    fn make_study(dir: &Path) {
        let mut w = create(&dir.join("events.log")).unwrap();
        let header = StudyHeader {
            id: "s".into(),
            space: space_from(&[("a", (0..3).map(Scalar::Int).collect())]).unwrap(),
            direction: Direction::Maximize,
            max_trials: 3,
            n_jobs: 1,
            solver: "grid".into(),
            system_context: String::new(),
            metric: "v".into(),
        };
        let run = RunSpec {
            solver: SolverKind::Grid,
            seed: 0,
            slots: 1,
            supervised: false,
            backend: BackendSpec::Tabulated {
                table: "x.csv".into(),
                latency_ms: 0,
            },
            agent: None,
            playbook: None,
            initial: vec![],
        };
        for p in [
            EventPayload::StudyCreated { header, run },
            EventPayload::LifecycleChanged {
                event: LifecycleEvent::Start,
                from: Lifecycle::Created,
                to: Lifecycle::Running,
                cause: "run".into(),
            },
        ] {
            let rec = w.stamp(0, p);
            w.append(&rec).unwrap();
        }
    }

    #[test]
    fn offline_pause_then_illegal_stop() {
        let dir = tempfile::tempdir().unwrap();
        make_study(dir.path());
        let clock = StepClock::new(0, 1);
        let s = apply_offline(dir.path(), &ControlCommand::Pause, &clock).unwrap();
        assert_eq!(s.lifecycle, Lifecycle::Paused);
        assert!(matches!(
            apply_offline(dir.path(), &ControlCommand::Stop, &clock),
            Err(ControlError::Rejected(ModelError::IllegalTransition { .. }))
        ));
        let s = apply_offline(
            dir.path(),
            &ControlCommand::Configure {
                max_trials: Some(2),
                n_jobs: Some(2),
            },
            &clock,
        )
        .unwrap();
        assert_eq!((s.max_trials, s.n_jobs), (2, 2));
        let r = replay_file(&dir.path().join("events.log")).unwrap();
        assert_eq!(r.study.lifecycle, Lifecycle::Paused);
        assert_eq!(r.records.len(), 5);
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        make_study(dir.path());
        let held = RunnerLock::try_acquire(dir.path()).unwrap();
        assert!(held.is_some());
        assert!(matches!(
            apply_offline(dir.path(), &ControlCommand::Pause, &StepClock::new(0, 1)),
            Err(ControlError::Busy)
        ));
        drop(held);
        assert!(RunnerLock::try_acquire(dir.path()).unwrap().is_some());
    }

    #[test]
    fn inbox_reads_only_new_complete_lines() {
        let dir = tempfile::tempdir().unwrap();
        enqueue(dir.path(), &ControlCommand::Pause).unwrap();
        let mut inbox = FileInbox::attach(dir.path());
        assert!(inbox.poll().is_empty());
        enqueue(dir.path(), &ControlCommand::StopOverride { approve: false }).unwrap();
        let mut f = OpenOptions::new().append(true).open(inbox_path(dir.path())).unwrap();
        f.write_all(b"{\"command\":\"res").unwrap();
        assert_eq!(inbox.poll(), vec![ControlCommand::StopOverride { approve: false }]);
        f.write_all(b"ume\"}\n").unwrap();
        assert_eq!(inbox.poll(), vec![ControlCommand::Resume]);
    }

    #[test]
    fn configure_needs_a_field() {
        let dir = tempfile::tempdir().unwrap();
        make_study(dir.path());
        let r = replay_file(&dir.path().join("events.log")).unwrap();
        let empty = ControlCommand::Configure {
            max_trials: None,
            n_jobs: None,
        };
        assert!(empty.check(&r.study).is_err());
    }
}
