//! `hsidiff`: convert, train, denoise, simulate, evaluate, sweep-tcut.
//!
//! Exit codes: 0 success, 2 usage or contract violation, 3 numerical
//! failure (training divergence).

mod commands;
mod raw;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsi_diffusion::Error;

#[derive(Parser, Debug)]
#[command(name = "hsidiff", version, about = "Truncated-diffusion denoising for hyperspectral cubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration layers shared by every command.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// key=value config file, applied over the built-in defaults
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. --set train.batch_size=4 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Top-level seed; component seeds not set explicitly derive from it
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a raw little-endian array into an HSC cube
    Convert(commands::ConvertArgs),
    /// Train a noise predictor
    Train(commands::TrainArgs),
    /// Denoise a cube with a trained predictor
    Denoise(commands::DenoiseArgs),
    /// Add simulated noise to a clean cube
    Simulate(commands::SimulateArgs),
    /// Score an estimate against a reference (CC, mPSNR, mSSIM, SAM)
    Evaluate(commands::EvaluateArgs),
    /// Denoise at several truncation steps and score each
    #[command(name = "sweep-tcut")]
    SweepTcut(commands::SweepArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Train(a) => commands::train(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SweepTcut(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hsidiff: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
