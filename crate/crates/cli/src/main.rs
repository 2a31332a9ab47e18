//! `sparsecast` command-line tool.

mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use sparsecast::Error;

use commands::Cli;

/// Exit status for each error class: 2 usage, configuration or a failed
/// training run, 3 data integrity, 4 numerics.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidParam(_)
        | Error::Design { .. }
        | Error::Json(_)
        | Error::Io { .. }
        | Error::TrainingDiagnostic { .. } => 2,
        Error::Schema(_)
        | Error::Domain { .. }
        | Error::OutOfSupport(_)
        | Error::Integrity { .. }
        | Error::Shape(_)
        | Error::Csv(_) => 3,
        Error::Numerics(_) | Error::EmptyAggregate(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::Design { .. } = err {
                eprintln!("hint: every factor level needs records under several metrics and runs; drop unused levels or pick another reference");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
