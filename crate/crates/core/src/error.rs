use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,
    #[error(
        "loop closure did not converge within {iterations} iterations (residual {residual:e})"
    )]
    WorkspaceViolation { iterations: usize, residual: f64 },
    #[error("transmission singularity: closure Jacobian is not invertible")]
    TransmissionSingularity,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate regression: {0}")]
    DegenerateFit(String),
    #[error("empty trajectory library")]
    EmptyLibrary,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
