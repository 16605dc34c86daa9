//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use selfai_core::manager::{simulate, Simulation, SimulationResult, Table};
use selfai_core::solvers::{classical, SolverKind};
use selfai_core::synthetic::{generate, shipped};

/// A shipped benchmark table by name.
pub fn shipped_table(name: &str) -> Arc<Table> {
    let spec = shipped()
        .into_iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("no shipped table `{name}`"));
    Arc::new(generate(&spec))
}

/// A classical solver run of `max_trials` trials on `table`.
pub fn classical_run(table: &Arc<Table>, kind: SolverKind, seed: u64, max_trials: usize) -> SimulationResult {
    let mut sim = Simulation::new(table, kind, seed);
    sim.max_trials = Some(max_trials);
    simulate(table, &sim, classical(kind).expect("classical kind")).expect("tabulated runs succeed")
}
