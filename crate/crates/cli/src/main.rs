use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use dbm_edge_lab::{run_experiment, ExperimentConfig, Kind};

#[derive(Debug, Parser)]
#[command(name = "dbm-edge-lab", version, about = "Dyson Brownian motion edge experiments")]
struct Cli {
    #[arg(value_enum)]
    experiment: Kind,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First seed; overrides `seeds.start`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = cli.seed {
        config.seeds.start = s;
    }
    if let Err(e) = config.validate(cli.experiment) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    // --out is not written into the config, so the echo and hash stay location-independent
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", cli.experiment)));

    match run_experiment(cli.experiment, &config, &out).with_context(|| format!("running {}", cli.experiment)) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = report.replicas.iter().filter(|r| !r.ok).count();
            if failed > 0 {
                println!("{failed} of {} replicas failed", report.replicas.len());
            }
            println!("report written to {}", out.join("report.json").display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
