use std::process::ExitCode;

use minerdyn_core::Error;
use thiserror::Error;

/// Command failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("infeasible controller: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Range(_) | Error::InvalidParameter(_) | Error::Configuration(_) => {
                CliError::Config(msg)
            }
            Error::Integration { .. }
            | Error::StepLimit { .. }
            | Error::RootsNotReal { .. }
            | Error::SweepLeg { .. } => CliError::Numeric(msg),
            Error::Domain(_) | Error::Infeasible(_) => CliError::Infeasible(msg),
            Error::Csv(_) | Error::Io(_) => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
