//! covkit: covariance matrices for fitted model parameters — from the
//! Hessian of a black-box objective, and from importance-sampled
//! posterior moments.

mod config;
mod data;
mod output;
mod pipeline;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Mode, Overrides};

#[derive(Parser)]
#[command(
    name = "covkit",
    version,
    about = "Covariance matrices for fitted model parameters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hessian-inverse covariance at the fitted optimum
    Hessian(Overrides),
    /// Posterior mean and covariance by adaptive importance sampling
    Posterior(Overrides),
    /// Accuracy/cost comparison of the differentiation methods
    Benchmark(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, overrides) = match &cli.command {
        Command::Hessian(o) => (Mode::Hessian, o),
        Command::Posterior(o) => (Mode::Posterior, o),
        Command::Benchmark(o) => (Mode::Benchmark, o),
    };
    match pipeline::run(mode, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
