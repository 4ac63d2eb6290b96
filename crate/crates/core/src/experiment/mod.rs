//! Configuration, execution, metrics and plot-data export for experiments.

pub mod config;
pub mod metrics;
pub mod plots;
pub mod run;

pub use config::{ExperimentConfig, Method};
pub use metrics::{compute_metrics, Confusion, DetectionMetrics};
pub use run::{evaluate_run, load_data, run, RunOutcome};
