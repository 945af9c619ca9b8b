use thiserror::Error;

/// Errors raised by the library.
///
/// Structural problems (bad indices, malformed input, precondition
/// violations) are kept apart from physics violations, which are reported
/// through validation reports rather than errors wherever the caller may
/// want to inspect them.
#[derive(Debug, Error)]
pub enum DvmError {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("physics violation: {0}")]
    Physics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for DvmError {
    fn from(e: serde_json::Error) -> Self {
        DvmError::Parse(e.to_string())
    }
}

impl From<csv::Error> for DvmError {
    fn from(e: csv::Error) -> Self {
        DvmError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DvmError>;
