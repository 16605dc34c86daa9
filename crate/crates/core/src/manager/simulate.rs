//! Whole studies on a tabulated benchmark, held in memory.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use super::backend::TabulatedBackend;
use super::events::{BackendSpec, EventWriter, RunSpec};
use super::orchestrator::{Orchestrator, OrchestratorError, RunOutcome};
use super::table::Table;
use crate::agent::AgentConfig;
use crate::clock::StepClock;
use crate::metrics::Trajectory;
use crate::model::{Study, StudyHeader};
use crate::solvers::{GridSolver, Solver, SolverKind};

#[derive(Debug, Clone)]
pub struct Simulation {
    pub id: String,
    pub solver: SolverKind,
    pub seed: u64,
    pub n_jobs: usize,
    pub slots: usize,
    /// Defaults to the table size.
    pub max_trials: Option<usize>,
    pub system_context: String,
    /// Recorded in the log as the table's location.
    pub table_path: PathBuf,
    pub agent: Option<AgentConfig>,
    pub playbook: Option<PathBuf>,
}

impl Simulation {
    pub fn new(table: &Table, solver: SolverKind, seed: u64) -> Self {
        Self {
            id: format!("{}-{}-{seed}", table.meta.name, solver.as_str()),
            solver,
            seed,
            n_jobs: 1,
            slots: 1,
            max_trials: None,
            system_context: String::new(),
            table_path: PathBuf::from(format!("{}.csv", table.meta.name)),
            agent: None,
            playbook: None,
        }
    }

    pub fn header(&self, table: &Table) -> StudyHeader {
        StudyHeader {
            id: self.id.clone(),
            space: table.space.clone(),
            direction: table.meta.direction,
            max_trials: self.max_trials.unwrap_or(table.space.cardinality()),
            n_jobs: self.n_jobs,
            solver: self.solver.as_str().to_string(),
            system_context: self.system_context.clone(),
            metric: table.meta.metric.clone(),
        }
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            solver: self.solver,
            seed: self.seed,
            slots: self.slots,
            supervised: false,
            backend: BackendSpec::Tabulated {
                table: self.table_path.clone(),
                latency_ms: 0,
            },
            agent: self.agent.clone(),
            playbook: self.playbook.clone(),
            initial: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub study: Study,
    pub outcome: RunOutcome,
    /// The event log, byte for byte.
    pub log: Vec<u8>,
}

impl SimulationResult {
    pub fn trajectory(&self, table: &Table) -> Trajectory {
        Trajectory::from_study(&self.study, table.stats())
    }
}

/// Runs `solver` on `table` with a stepping clock, so the same inputs always
/// give the same log.
pub fn simulate(
    table: &Arc<Table>,
    sim: &Simulation,
    solver: Box<dyn Solver>,
) -> Result<SimulationResult, OrchestratorError> {
    let backend = Arc::new(TabulatedBackend::new(Arc::clone(table), Duration::ZERO));
    let mut orch = Orchestrator::create(
        sim.header(table),
        sim.run_spec(),
        EventWriter::new(Vec::new(), 1),
        solver,
        backend,
        Arc::new(StepClock::new(0, 1)),
    )?;
    let outcome = orch.run()?;
    let study = orch.study().clone();
    Ok(SimulationResult {
        study,
        outcome,
        log: orch.into_writer(),
    })
}

/// The grid-search trajectory of `table`: every value in enumeration order.
pub fn grid_baseline(table: &Arc<Table>) -> Result<Trajectory, OrchestratorError> {
    let sim = Simulation::new(table, SolverKind::Grid, 0);
    Ok(simulate(table, &sim, Box::new(GridSolver))?.trajectory(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::peaked_5x5;

    #[test]
    fn grid_baseline_is_the_table_in_order() {
        let t = Arc::new(peaked_5x5());
        let b = grid_baseline(&t).unwrap();
        assert_eq!(b.values, t.values());
        assert_eq!(b.stop_ordinal, 25);
    }

    #[test]
    fn repeated_runs_give_identical_logs() {
        let t = Arc::new(peaked_5x5());
        let mut sim = Simulation::new(&t, SolverKind::Tpe, 7);
        sim.max_trials = Some(12);
        let a = simulate(&t, &sim, Box::new(crate::solvers::TpeSolver::default())).unwrap();
        let b = simulate(&t, &sim, Box::new(crate::solvers::TpeSolver::default())).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.study.completed_count(), 12);
    }
}
