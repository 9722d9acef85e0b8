use thiserror::Error;

/// Errors raised by the laboratory. Out-of-domain numeric evaluations are not
/// errors: rate functions and log-MGFs return `f64::INFINITY` instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// Invalid parameters, malformed law strings, mismatched grids.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested operation is not defined for this input (e.g. a rate
    /// function for a sampling-only law).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Argument outside the mathematical domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Allocation or enumeration size guard exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Config(msg.into()))
}
