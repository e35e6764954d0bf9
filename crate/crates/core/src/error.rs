use alloc::string::String;

/// Failure modes shared by every algorithm in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("action {action} cannot be implemented under the requested incentive constraints")]
    NotImplementable { action: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("iteration limit of {limit} reached in {context}")]
    IterationLimit { limit: usize, context: &'static str },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { what, expected, found })
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
