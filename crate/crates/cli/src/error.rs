use std::process::ExitCode;

use surveydp_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Budget(Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Budget(_) => ExitCode::from(3),
            CliError::Output { .. } => ExitCode::FAILURE,
        }
    }

    /// Library errors with the scenario they came from.
    pub fn from_core(context: &str, err: Error) -> Self {
        match err {
            Error::BudgetExceeded { .. } => CliError::Budget(err),
            other => CliError::Config(format!("{context}: {other}")),
        }
    }
}
