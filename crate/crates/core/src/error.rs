use thiserror::Error;

/// Failure modes shared by every module of the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("supercritical potential rejected: mu = {mu} >= critical {critical}")]
    SupercriticalRejected { mu: f64, critical: f64 },
    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("regression failure in configuration `{config}`: {detail}")]
    RegressionFailure { config: String, detail: String },
    #[error("internal error: {0}")]
    InternalError(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::InvalidInput(format!("json: {e}"))
    }
}
