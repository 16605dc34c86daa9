//! `bench`: every (table, solver, seed) cell of a suite, scored against the
//! grid-search run of the same table.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{read_err, write_err, CliError};
use selfai_core::agent::EndpointConfig;
use selfai_core::config::parse_config;
use selfai_core::manager::setup::build_solver;
use selfai_core::manager::{grid_baseline, simulate, Simulation, Table};
use selfai_core::metrics::report::{ProfileSeries, ReportDocument, RunFailure, TaskInfo};
use selfai_core::metrics::{aggregate, evaluate, performance_profile, RunCell, Trajectory};
use selfai_core::solvers::SolverKind;

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteTask {
    /// Benchmark table (CSV with its `.meta.json` sidecar).
    pub table: PathBuf,
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub n_jobs: usize,
    /// Defaults to the table size.
    #[serde(default)]
    pub max_trials: Option<usize>,
    /// Replies for the agent solvers.
    #[serde(default)]
    pub playbook: Option<PathBuf>,
    /// Study config whose system block becomes the agents' context.
    #[serde(default)]
    pub config: Option<PathBuf>,
}

/// A benchmark suite file (YAML or JSON). Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSuite {
    pub tasks: Vec<SuiteTask>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

struct LoadedTask {
    spec: SuiteTask,
    table: Arc<Table>,
    context: String,
}

impl BenchSuite {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(read_err(path))?;
        let mut suite: BenchSuite = serde_yaml::from_str(&text).map_err(|e| CliError::Suite {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for t in &mut suite.tasks {
            resolve(&mut t.table);
            t.playbook.as_mut().map(resolve);
            t.config.as_mut().map(resolve);
        }
        suite.out.as_mut().map(resolve);
        Ok(suite)
    }

    /// Loads every table and checks the suite is runnable.
    fn prepare(&self, origin: &Path) -> Result<Vec<LoadedTask>, CliError> {
        let invalid = |reason: String| CliError::Suite {
            path: origin.to_path_buf(),
            reason,
        };
        if self.tasks.is_empty() {
            return Err(invalid("no tasks".into()));
        }
        let mut loaded: Vec<LoadedTask> = Vec::new();
        for t in &self.tasks {
            let table = Table::load(&t.table)?;
            let name = &table.meta.name;
            if t.solvers.is_empty() {
                return Err(invalid(format!("task {name} lists no solvers")));
            }
            if t.seeds.is_empty() {
                return Err(invalid(format!("task {name} lists no seeds")));
            }
            if t.n_jobs == 0 || t.max_trials == Some(0) {
                return Err(invalid(format!("task {name}: n_jobs and max_trials must be positive")));
            }
            if loaded.iter().any(|l| &l.table.meta.name == name) {
                return Err(invalid(format!("task {name} appears twice")));
            }
            let context = match &t.config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(read_err(p))?;
                    parse_config(&text)?.system_context()
                }
                None => String::new(),
            };
            loaded.push(LoadedTask {
                spec: t.clone(),
                table: Arc::new(table),
                context,
            });
        }
        Ok(loaded)
    }
}

/// Runs the suite. Cells that fail are listed in the report and left out
/// of the aggregate; a solver missing a task is left out of the aggregate
/// entirely so every ranked solver covers the same tasks.
pub fn run_suite(
    suite: &BenchSuite,
    origin: &Path,
    endpoint: Option<EndpointConfig>,
) -> Result<ReportDocument, CliError> {
    let tasks = suite.prepare(origin)?;
    let mut doc = ReportDocument {
        tasks: Vec::new(),
        runs: Vec::new(),
        aggregate: None,
        profiles: Vec::new(),
        failures: Vec::new(),
    };
    for task in &tasks {
        let table = &task.table;
        let name = table.meta.name.clone();
        doc.tasks.push(TaskInfo {
            name: name.clone(),
            direction: table.meta.direction,
            metric: table.meta.metric.clone(),
            cardinality: table.space.cardinality(),
            optimum: table.value_at(table.optimum_number()).expect("in range"),
        });
        let baseline = match grid_baseline(table) {
            Ok(b) => b,
            Err(e) => {
                doc.failures.push(RunFailure {
                    task: name.clone(),
                    solver: SolverKind::Grid.as_str().into(),
                    seed: None,
                    error: format!("baseline: {e}"),
                });
                continue;
            }
        };
        for &solver in &task.spec.solvers {
            for &seed in &task.spec.seeds {
                log::info!("bench {name} {solver} seed {seed}");
                match run_cell(task, solver, seed, &baseline, endpoint.clone()) {
                    Ok((cell, profile)) => {
                        doc.runs.push(cell);
                        doc.profiles.push(profile);
                    }
                    Err(error) => doc.failures.push(RunFailure {
                        task: name.clone(),
                        solver: solver.as_str().into(),
                        seed: Some(seed),
                        error,
                    }),
                }
            }
        }
    }
    doc.aggregate = ranked_subset(&doc.runs, doc.tasks.len())
        .and_then(|cells| aggregate(&cells).ok());
    Ok(doc)
}

fn run_cell(
    task: &LoadedTask,
    solver: SolverKind,
    seed: u64,
    baseline: &Trajectory,
    endpoint: Option<EndpointConfig>,
) -> Result<(RunCell, ProfileSeries), String> {
    let table = &task.table;
    let mut sim = Simulation::new(table, solver, seed);
    sim.n_jobs = task.spec.n_jobs;
    sim.slots = task.spec.n_jobs;
    sim.max_trials = task.spec.max_trials;
    sim.system_context = task.context.clone();
    sim.table_path = task.spec.table.clone();
    if solver.is_agent() {
        sim.playbook = task.spec.playbook.clone();
    }
    let built = build_solver(&sim.run_spec(), endpoint, None, 0).map_err(|e| e.to_string())?;
    let result = simulate(table, &sim, built).map_err(|e| e.to_string())?;
    let traj = result.trajectory(table);
    let metrics = evaluate(&traj, baseline).map_err(|e| e.to_string())?;
    let points = if traj.executed().is_empty() {
        Vec::new()
    } else {
        performance_profile(&traj).map_err(|e| e.to_string())?.points()
    };
    let cell = RunCell {
        task: table.meta.name.clone(),
        solver: solver.as_str().into(),
        seed: Some(seed),
        metrics,
    };
    let profile = ProfileSeries {
        task: cell.task.clone(),
        solver: cell.solver.clone(),
        seed: cell.seed,
        points,
    };
    Ok((cell, profile))
}

/// Cells of the solvers that have at least one run on each of `n_tasks` tasks.
fn ranked_subset(cells: &[RunCell], n_tasks: usize) -> Option<Vec<RunCell>> {
    let mut solvers: Vec<&str> = Vec::new();
    for c in cells {
        if !solvers.contains(&c.solver.as_str()) {
            solvers.push(&c.solver);
        }
    }
    let complete: Vec<&str> = solvers
        .into_iter()
        .filter(|s| {
            let mut tasks: Vec<&str> = cells.iter().filter(|c| c.solver == *s).map(|c| c.task.as_str()).collect();
            tasks.sort();
            tasks.dedup();
            tasks.len() == n_tasks
        })
        .collect();
    let kept: Vec<RunCell> = cells
        .iter()
        .filter(|c| complete.contains(&c.solver.as_str()))
        .cloned()
        .collect();
    (!kept.is_empty()).then_some(kept)
}

/// Pretty JSON with a trailing newline; identical inputs give identical bytes.
pub fn render_report(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(doc: &ReportDocument, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(write_err(parent))?;
    }
    fs::write(path, render_report(doc)).map_err(write_err(path))
}

pub fn read_report(path: &Path) -> Result<ReportDocument, CliError> {
    let text = fs::read_to_string(path).map_err(read_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Suite {
        path: path.to_path_buf(),
        reason: format!("not a report: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use selfai_core::synthetic::peaked_5x5;

    fn suite_with(dir: &Path, solvers: &str) -> PathBuf {
        peaked_5x5().write(dir).unwrap();
        let path = dir.join("suite.yaml");
        fs::write(
            &path,
            format!("tasks:\n  - table: peaked_5x5.csv\n    solvers: [{solvers}]\n    seeds: [0, 1]\n"),
        )
        .unwrap();
        path
    }

    #[test]
    fn empty_suite_is_rejected() {
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join("s.yaml");
        fs::write(&path, "tasks: []\n").unwrap();
        let suite = BenchSuite::load(&path).unwrap();
        assert!(matches!(run_suite(&suite, &path, None), Err(CliError::Suite { .. })));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join("s.yaml");
        fs::write(&path, "tasks: []\nbogus: 1\n").unwrap();
        assert!(BenchSuite::load(&path).is_err());
    }

    #[test]
    fn grid_against_itself_has_unit_aup_d() {
        let d = tempfile::tempdir().unwrap();
        let path = suite_with(d.path(), "grid");
        let doc = run_suite(&BenchSuite::load(&path).unwrap(), &path, None).unwrap();
        assert_eq!(doc.runs.len(), 2);
        for r in &doc.runs {
            assert_eq!(r.metrics.aup_d, 1.0);
            assert_eq!(r.metrics.t_stop, 1.0);
            assert_eq!(r.metrics.gain, 1.0);
            let expected = 1.0 - (r.metrics.t_best + 1.0) / 2.0;
            assert!((r.metrics.score - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_playbook_is_a_cell_failure() {
        let d = tempfile::tempdir().unwrap();
        let path = suite_with(d.path(), "grid, scripted");
        let doc = run_suite(&BenchSuite::load(&path).unwrap(), &path, None).unwrap();
        assert_eq!(doc.failures.len(), 2);
        let agg = doc.aggregate.unwrap();
        assert_eq!(agg.solvers.len(), 1);
        assert_eq!(agg.solvers[0].solver, "grid");
    }
}
