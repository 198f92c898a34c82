//! `thermo`: command-line front end for the thermodynamic-formalism toolkit.
//!
//! Every command writes a JSON report (stdout, or `--report <path>`) holding the
//! inputs, versions, seed and results; tables go to `--out` as CSV.
//!
//! Exit codes: 0 ok, 2 config or argument error, 3 budget exceeded,
//! 4 convergence failure, 5 a verification command ran but its check failed,
//! 1 anything else. `THERMO_THREADS` caps the worker pool.

mod args;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;
use error::CliError;

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("THERMO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("THERMO_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let cmd = &cli.command;
    let (model, outcome) = commands::run(cmd)?;
    let common = cmd.common();
    let report = json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": thermo_core::VERSION,
        "seed": common.seed,
        "threads": rayon::current_num_threads(),
        "inputs": cmd,
        "model": model,
        "verified": outcome.verified,
        "result": outcome.result,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &common.report {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    match outcome.verified {
        Some(false) => Err(CliError::VerificationFailed(format!("{} check did not pass", cmd.name()))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("thermo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
