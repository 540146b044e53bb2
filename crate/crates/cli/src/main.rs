//! `hybridseg`: exit 0 on success, 2 when the guidance mask carries no
//! lesion signal, 1 for every other failure.

mod args;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use hybridseg_core::Error;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("no counterpart for {0}")]
    Unmatched(PathBuf),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::NoGuidanceSignal) => 2,
            _ => 1,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Superpixels(a) => commands::superpixels(a),
        Command::Evaluate(a) => commands::evaluate_dirs(a),
        Command::Bench(a) => commands::bench(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures, not the no-signal code
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridseg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
