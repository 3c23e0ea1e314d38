//! Error type shared across the crate, with a stable mapping to CLI exit codes.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A log line (or config file) could not be decoded.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The data decoded but violates a structural invariant.
    #[error("schema error{}: {msg}", fmt_line(.line))]
    Schema { line: Option<usize>, msg: String },

    /// A precondition on an operation's inputs failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A budget allocation violates the error-decomposition constraint,
    /// or no feasible allocation exists.
    #[error("infeasible budget: {0}")]
    Infeasible(String),

    /// A persisted artifact was produced by an incompatible format version.
    #[error("artifact format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn schema_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Schema {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code for this error. 0 is success; the nonzero codes
    /// are documented in the README and stable across releases.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Schema { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::VersionMismatch { .. } => 4,
            _ => 1,
        }
    }
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" at line {n}"),
        None => String::new(),
    }
}
