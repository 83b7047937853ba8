use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The traffic intensity is on the wrong side of 1 for the requested quantity.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    /// A root that is not guaranteed to exist was not found in the admissible bracket.
    #[error("existence error: {0}")]
    Existence(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("index {index} outside [1, {levels}]")]
    Index { index: usize, levels: usize },

    #[error("config error: {0}")]
    Config(String),

    /// Both sides of the control problem report interior minima with equal value.
    #[error("ambiguous solution: {0}")]
    Ambiguity(String),

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the `damctl` binary: 2 for configuration
    /// and I/O problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => 2,
            _ => 3,
        }
    }
}
