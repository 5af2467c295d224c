//! Configuration-driven experiment runner for the SESOP-MG solvers.
//!
//! Each experiment is one TOML document ([`config::ExperimentConfig`]);
//! presets bundle the experiments behind each table and figure and
//! [`output`] writes their traces as CSV.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;
pub mod studies;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use runner::{run_batch, run_experiment, RunReport};
