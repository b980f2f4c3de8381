//! Experiment driver: configuration, end-to-end runs and grading.

pub mod config;
pub mod metrics;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use metrics::{metric_extreme_errors, ExtremeRow};
pub use run::{run, RunError, RunSummary};
