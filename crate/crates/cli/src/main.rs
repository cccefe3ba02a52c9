use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collapse_cli::config::{parse_config_for, Mode};
use collapse_cli::run::{execute, RunError, EXIT_CHECKS_FAILED};
use serde_json::json;

#[derive(Parser)]
#[command(name = "collapse", version, about = "Stochastic wave-function collapse simulations")]
struct Cli {
    #[command(subcommand)]
    mode: ModeArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread count for ensembles; 1 runs serially. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory. Falls back to COLLAPSE_OUT_DIR, then the config, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum ModeArg {
    /// One trajectory: populations and norm over time.
    Trajectory,
    /// Many trajectories: checkpoint statistics.
    Ensemble,
    /// Ensemble-averaged density matrix from the master equation.
    Master,
    /// Checks a generated colored-noise path against its stationary law.
    NoiseValidate,
    /// Colored-noise sweep toward the white-noise limit.
    Homogenize,
    /// Born-rule and martingale checks on an ensemble.
    BornSuite,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Trajectory => Mode::Trajectory,
            ModeArg::Ensemble => Mode::Ensemble,
            ModeArg::Master => Mode::Master,
            ModeArg::NoiseValidate => Mode::NoiseValidate,
            ModeArg::Homogenize => Mode::Homogenize,
            ModeArg::BornSuite => Mode::BornSuite,
        }
    }
}

fn run(cli: Cli) -> Result<collapse_cli::RunOutput, RunError> {
    let text = match &cli.common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| RunError::Io { path: p.clone(), message: e.to_string() })?,
        None => "{}".to_string(),
    };
    let mut config = parse_config_for(&text, Some(cli.mode.into()))?;
    if let Some(seed) = cli.common.seed {
        config.seed = Some(seed);
    }
    let out = cli
        .common
        .out
        .or_else(|| std::env::var_os("COLLAPSE_OUT_DIR").map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(&config, cli.common.workers, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(output) => {
            println!("{}", serde_json::to_string(&output).expect("plain data"));
            let code = output.exit_code();
            if code == EXIT_CHECKS_FAILED {
                let err = json!({ "error": "checks_failed", "exit_code": code, "message": "one or more checks failed", "files": output.files });
                eprintln!("{err}");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
