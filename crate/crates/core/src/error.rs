use thiserror::Error;

#[derive(Debug, Error)]
pub enum TlpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("numeric underflow: {0}")]
    NumericUnderflow(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, TlpError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(TlpError::InvalidArgument(msg.into()))
}
