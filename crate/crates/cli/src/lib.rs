//! Command-line entry points and the study-control service.

pub mod bench;
mod error;
pub mod run;
pub mod serve;
pub mod store;

pub use error::CliError;
