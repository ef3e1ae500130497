use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, arity mismatch, or constraint violation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation called in an invalid order (e.g. backward before forward).
    #[error("state error: {0}")]
    State(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Numerical integration produced a non-finite quantity; carries the
    /// offending state vector.
    #[error("integration error: {context}; state = {state:?}")]
    Integration { context: String, state: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical/runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            _ => 3,
        }
    }
}
