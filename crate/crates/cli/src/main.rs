//! Operator front end: validate models and strategies, run simulations,
//! launch fuzzing campaigns, build and query exclusion strategies, and
//! re-prune recorded tests.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Errors sorted by exit code: validation and parse problems exit 1, budget
/// and size blow-ups exit 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(msg: impl std::fmt::Display) -> Self {
        CliError::Validation(msg.to_string())
    }

    fn runtime(msg: impl std::fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }
}

impl From<icsfuzz_core::plant::PlantFileError> for CliError {
    fn from(e: icsfuzz_core::plant::PlantFileError) -> Self {
        CliError::validation(e)
    }
}

impl From<icsfuzz_core::strategy::file::StrategyFileError> for CliError {
    fn from(e: icsfuzz_core::strategy::file::StrategyFileError) -> Self {
        CliError::validation(e)
    }
}

impl From<icsfuzz_core::suite::SuiteError> for CliError {
    fn from(e: icsfuzz_core::suite::SuiteError) -> Self {
        CliError::validation(e)
    }
}

impl From<icsfuzz_core::equiv::EquivError> for CliError {
    fn from(e: icsfuzz_core::equiv::EquivError) -> Self {
        use icsfuzz_core::equiv::EquivError::*;
        match e {
            BudgetExceeded { .. } | SizeCapExceeded { .. } | ProductTooLarge { .. } => {
                CliError::runtime(e)
            }
            _ => CliError::validation(e),
        }
    }
}

impl From<icsfuzz_core::fuzz::FuzzError> for CliError {
    fn from(e: icsfuzz_core::fuzz::FuzzError) -> Self {
        use icsfuzz_core::fuzz::FuzzError::*;
        match e {
            InvalidStrategy(_) | UnknownSensor(_) | Cond(_) => CliError::validation(e),
            other => CliError::runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
