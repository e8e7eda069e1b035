//! `wmedian`: compute Wasserstein medians from the command line.
//!
//! Exit codes: 0 on success, 1 on runtime failure or a failed `verify`,
//! 2 on usage errors, 3 when a solver stops before converging (outputs are
//! still written). A one-line JSON summary goes to standard output and all
//! diagnostics to standard error. `WMEDIAN_THREADS` caps the worker threads.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{CliError, Outcome, Progress};

const THREADS_ENV: &str = "WMEDIAN_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(e.to_string()))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    let progress = Progress { quiet: cli.quiet };
    match &cli.command {
        Command::Median1d(a) => commands::median1d(a, progress),
        Command::Median2d(a) => commands::median2d(a, progress),
        Command::Plaplace(a) => commands::plaplace(a, progress),
        Command::Experiment { kind } => commands::experiment(kind, progress),
        Command::Verify(a) => commands::verify(a, progress),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if !outcome.converged {
                ExitCode::from(3)
            } else if !outcome.valid {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
