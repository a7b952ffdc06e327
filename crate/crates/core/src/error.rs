use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CspError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("internal contract broken: {0}")]
    Internal(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CspError>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(CspError::Argument(msg.into()))
}
