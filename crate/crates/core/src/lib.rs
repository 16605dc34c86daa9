//! Hyperparameter search over discrete grids, driven by classical solvers or
//! by a language-model agent that also decides when to stop.

pub mod agent;
pub mod clock;
pub mod config;
pub mod manager;
pub mod metrics;
pub mod model;
pub mod solvers;
pub mod synthetic;

pub use model::*;
