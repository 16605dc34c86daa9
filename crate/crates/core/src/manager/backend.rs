//! Trial execution: table lookups and external commands.
//!
//! A subprocess trial reports its result either as the last stdout line
//! matching `SELFAI_RESULT value=<float>`, or, failing that, as a file
//! `selfai_result` containing `{"value": <float>}` in the trial's scratch
//! directory. Each attempt runs in a fresh working directory
//! `<workdir>/trial-<n>/attempt-<k>`; the scratch directory
//! `<workdir>/trial-<n>/scratch` persists across attempts so a program can
//! resume from its own checkpoints.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::table::Table;
use crate::agent::prompts::fill;
use crate::model::{SearchSpace, TrialConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialJob {
    pub number: usize,
    pub config: TrialConfig,
    /// 1-based.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
pub enum TrialError {
    #[error("no table entry for config {0}")]
    MissingEntry(usize),
    #[error("process exited with {}{}", .code.map(|c| format!("status {c}")).unwrap_or_else(|| "a signal".into()), if .stderr.is_empty() { String::new() } else { format!(": {}", .stderr) })]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("timed out after {0} s")]
    Timeout(u64),
    #[error("no SELFAI_RESULT line and no result file")]
    MissingSentinel,
    #[error("could not launch: {0}")]
    Launch(String),
}

impl TrialError {
    pub fn is_transient(&self) -> bool {
        matches!(self, TrialError::Timeout(_) | TrialError::NonZeroExit { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryDecision {
    Retry,
    GiveUp,
}

/// Retries transient failures while fewer than `max_attempts` attempts have
/// failed; everything else is final.
pub fn retry_policy(failure: &TrialError, failed_attempts: u32, max_attempts: u32) -> RetryDecision {
    if failure.is_transient() && failed_attempts < max_attempts {
        RetryDecision::Retry
    } else {
        RetryDecision::GiveUp
    }
}

pub trait Backend: Send + Sync {
    fn run(&self, job: &TrialJob) -> Result<f64, TrialError>;

    /// Instant backends are executed inline, in dispatch order.
    fn is_instant(&self) -> bool {
        false
    }
}

pub struct TabulatedBackend {
    table: Arc<Table>,
    latency: Duration,
}

impl TabulatedBackend {
    pub fn new(table: Arc<Table>, latency: Duration) -> Self {
        Self { table, latency }
    }
}

impl Backend for TabulatedBackend {
    fn run(&self, job: &TrialJob) -> Result<f64, TrialError> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        self.table
            .lookup(&job.config)
            .ok_or(TrialError::MissingEntry(job.number))
    }

    fn is_instant(&self) -> bool {
        self.latency.is_zero()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommandTemplateError {
    #[error("command template uses `{{{0}}}`, which is neither a dimension nor scratch/trial/attempt")]
    UnknownPlaceholder(String),
}

pub struct SubprocessBackend {
    command: String,
    workdir: PathBuf,
    timeout: Duration,
}

const BUILTIN_KEYS: [&str; 3] = ["scratch", "trial", "attempt"];

/// Wraps `s` in single quotes for `sh`.
pub fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_.\-]*)\}").expect("valid"))
}

fn sentinel_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^SELFAI_RESULT value=(\S+)$").expect("valid"))
}

/// Value from the last sentinel line of `stdout`, if any.
pub fn parse_sentinel(stdout: &str) -> Option<f64> {
    stdout
        .lines()
        .rev()
        .find_map(|l| sentinel_re().captures(l.trim()))
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| v.is_finite())
}

#[derive(Deserialize)]
struct ResultFile {
    value: f64,
}

impl SubprocessBackend {
    /// `command` may reference `{<dimension>}`, `{scratch}`, `{trial}` and
    /// `{attempt}`; values are shell-quoted on substitution.
    pub fn new(
        command: impl Into<String>,
        workdir: impl Into<PathBuf>,
        timeout: Duration,
        space: &SearchSpace,
    ) -> Result<Self, CommandTemplateError> {
        let command = command.into();
        for cap in placeholder_re().captures_iter(&command) {
            let key = &cap[1];
            if space.dimension(key).is_none() && !BUILTIN_KEYS.contains(&key) {
                return Err(CommandTemplateError::UnknownPlaceholder(key.to_string()));
            }
        }
        Ok(Self {
            command,
            workdir: workdir.into(),
            timeout,
        })
    }

    pub fn scratch_dir(&self, number: usize) -> PathBuf {
        self.workdir.join(format!("trial-{number}")).join("scratch")
    }

    fn render(&self, job: &TrialJob, scratch: &Path) -> String {
        let mut values: Vec<(String, String)> = job
            .config
            .iter()
            .map(|(k, v)| (k.clone(), shell_quote(&v.to_string())))
            .collect();
        values.push(("scratch".into(), shell_quote(&scratch.to_string_lossy())));
        values.push(("trial".into(), job.number.to_string()));
        values.push(("attempt".into(), job.attempt.to_string()));
        let refs: Vec<(&str, &str)> = values.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        fill(&self.command, &refs)
    }
}

impl Backend for SubprocessBackend {
    fn run(&self, job: &TrialJob) -> Result<f64, TrialError> {
        let launch = |e: std::io::Error| TrialError::Launch(e.to_string());
        let trial_dir = self.workdir.join(format!("trial-{}", job.number));
        let cwd = trial_dir.join(format!("attempt-{}", job.attempt));
        let scratch = self.scratch_dir(job.number);
        if cwd.exists() {
            std::fs::remove_dir_all(&cwd).map_err(launch)?;
        }
        std::fs::create_dir_all(&cwd).map_err(launch)?;
        std::fs::create_dir_all(&scratch).map_err(launch)?;
        let stdout_path = cwd.join("stdout.log");
        let stderr_path = cwd.join("stderr.log");
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(self.render(job, &scratch))
            .current_dir(&cwd)
            .stdin(Stdio::null())
            .stdout(File::create(&stdout_path).map_err(launch)?)
            .stderr(File::create(&stderr_path).map_err(launch)?)
            .spawn()
            .map_err(launch)?;
        let status = match child.wait_timeout(self.timeout).map_err(launch)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(TrialError::Timeout(self.timeout.as_secs()));
            }
        };
        if !status.success() {
            let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
            let tail: String = stderr.lines().last().unwrap_or("").chars().take(200).collect();
            return Err(TrialError::NonZeroExit {
                code: status.code(),
                stderr: tail,
            });
        }
        let stdout = std::fs::read_to_string(&stdout_path).unwrap_or_default();
        if let Some(v) = parse_sentinel(&stdout) {
            return Ok(v);
        }
        std::fs::read_to_string(scratch.join("selfai_result"))
            .ok()
            .and_then(|t| serde_json::from_str::<ResultFile>(&t).ok())
            .map(|r| r.value)
            .filter(|v| v.is_finite())
            .ok_or(TrialError::MissingSentinel)
    }
}
