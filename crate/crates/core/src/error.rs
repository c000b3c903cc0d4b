use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain where the requested quantity exists.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violated its documented invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An iterative numerical method failed to reach its target accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// The requested quantity is unbounded (e.g. infinite revival time).
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// A row of a tabulation failed; `index` is the offending row.
    #[error("row {index}: {source}")]
    Row {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
