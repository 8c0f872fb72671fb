//! Seeded experiment harness: parse a config, build identical instances per
//! (size, replicate) cell, run the enabled algorithms, and emit a metrics
//! CSV plus per-run metadata.

mod config;
mod runner;

pub use config::{Algorithm, DataSource, ExperimentConfig, Mode};
pub use runner::{run_experiment, ExperimentReport, MetricsRow, METRICS_HEADER};
