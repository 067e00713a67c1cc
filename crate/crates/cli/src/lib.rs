//! Experiment runner around the solver library: JSON-configured sweeps
//! with CSV/JSON outputs, plus single-instance solves and diagnostic
//! reports.

pub mod config;
pub mod runner;

pub use config::{DataSpec, ExperimentConfig, GridSpec, Method, Mode, SolverParams};
pub use runner::{run, RunArtifacts, TrialRow, RESULTS_HEADER};
