use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code and by the
/// C API to pick a status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, violated preconditions, invalid configuration.
    Usage,
    /// Malformed or structurally inconsistent input files.
    Data,
    /// File-system failure.
    Io,
    /// The objective produced a non-finite value mid-run.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Structure { path: String, message: String },

    #[error("non-finite objective value {value} at iteration {iteration}, slot {slot} ({algorithm} on {problem})")]
    NonFinite {
        algorithm: String,
        problem: String,
        iteration: usize,
        slot: usize,
        value: f64,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed for problem `{problem}`: {source}")]
    Stage {
        stage: &'static str,
        problem: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Usage(_) => ErrorKind::Usage,
            Error::Parse { .. } | Error::Structure { .. } | Error::Json(_) => ErrorKind::Data,
            Error::NonFinite { .. } => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, problem: &str) -> Self {
        Error::Stage {
            stage,
            problem: problem.to_string(),
            source: Box::new(self),
        }
    }
}
