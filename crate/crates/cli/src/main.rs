//! `proxyhash` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or format errors, 3 numeric failure
//! during training. `PROXYHASH_THREADS` sets the worker count.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser};

use args::{Cli, Command};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("PROXYHASH_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("PROXYHASH_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Encode(a) => commands::encode_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Ablate(a) => commands::ablate_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<proxyhash::Error>() {
        Some(proxyhash::Error::TrainingFailure { .. }) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect(), &Cli::command()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    // Clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse_from(argv);
    let result = init_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
