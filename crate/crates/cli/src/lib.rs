//! Experiment runner for the DBM edge laboratory.
//!
//! Every subcommand reads one JSON config, validates it completely, runs its
//! replicas in parallel and writes CSV tables plus `config.json` and
//! `report.json` into the output directory.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;
use std::time::Instant;

use anyhow::Result;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use report::{RunReport, Table};

/// Runs `kind` and writes its artifacts to `out`. The config must already be validated.
pub fn run_experiment(kind: Kind, config: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let output = experiments::run(kind, config)?;
    let report = RunReport {
        experiment: kind,
        config: config.clone(),
        config_hash: report::config_hash(config),
        replicas: output.replicas,
        aggregate: output.aggregate,
        checks: output.checks,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    report::write_outputs(out, &report, &output.tables)?;
    Ok(report)
}
