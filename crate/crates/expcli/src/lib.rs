//! Seeded experiment grids for the sparse robust mean estimators.
//!
//! A TOML [`ExperimentConfig`] describes the data, the adversary, the
//! estimators and an optional sweep. [`run_experiment`] executes every
//! (sweep point, trial) pair on a worker pool and writes `results.csv`,
//! [`run_trace`] records per-iteration trajectories and [`run_bench`] times
//! the estimators across dimensions. Results depend only on the config and
//! its base seed, never on the number of threads.

pub mod config;
mod error;
pub mod output;
pub mod runner;

pub use config::{parse_config, EstimatorName, ExperimentConfig, SweepAxis, SweepPoint};
pub use error::{CliError, CliResult};
pub use runner::{
    run_bench, run_bench_to, run_experiment, run_trace, run_trial, trace_trial, trial_data, trial_seed, BenchRow,
    ResultRow, TraceRun, TrialData,
};

/// Reads and validates a config file. A missing or unreadable file is a config error.
pub fn load_config(path: &std::path::Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
