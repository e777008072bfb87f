//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad indices, mismatched dimensions, grammar violations.
    #[error("argument error: {0}")]
    Argument(String),

    /// A configured resource cap would be exceeded (partition sizes, coproduct
    /// expansions, matrix entry counts, recursion width).
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// The requested operation is not defined for this group family.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
