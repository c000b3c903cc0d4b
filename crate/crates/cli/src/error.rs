use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or invalid configuration; `line` is 1-based when known.
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    /// A physics operation rejected its input or failed.
    #[error("{op}: {source}")]
    Op {
        op: &'static str,
        #[source]
        source: evwg_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("grid format: {0}")]
    Format(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            line: None,
            message: message.into(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

/// Attaches the name of the failing operation to a core error.
pub trait OpContext<T> {
    fn op(self, name: &'static str) -> Result<T, CliError>;
}

impl<T> OpContext<T> for evwg_core::Result<T> {
    fn op(self, name: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Op { op: name, source })
    }
}
