use thiserror::Error;

/// Errors raised by the laboratory's operations.
///
/// The variants map onto the runner's exit codes: `Domain`, `Argument` and
/// `Precondition` are caller errors, `Infeasible` reports inconsistent
/// constants, and `Parse`/`Io` come from file ingestion.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CzError {
    pub fn argument(msg: impl Into<String>) -> Self {
        CzError::Argument(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        CzError::Precondition(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CzError::Parse {
            line,
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for CzError {
    fn from(e: std::io::Error) -> Self {
        CzError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CzError>;
