use mimic_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Sorts a library error into the configuration or numerical class.
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::SingularMassMatrix
            | Error::WorkspaceViolation { .. }
            | Error::TransmissionSingularity
            | Error::DegenerateFit(_)
            | Error::Numerical(_) => CliError::Numerical(e.to_string()),
            Error::Io(io) => CliError::Io(io),
            _ => CliError::Config(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core(e)
    }
}
