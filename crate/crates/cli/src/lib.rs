//! Experiment runner for the coded aggregation simulator: JSON
//! configuration, the `run` and `check` commands, and their outputs.

pub mod check;
pub mod config;
pub mod run;

pub use check::{cmd_check, CheckReport};
pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use run::{cmd_run, MetricsRow, RunArgs, RunError, Summary};
