use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid record: {0}")]
    Validation(String),

    #[error("config: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Protocol(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{job}: {source}")]
    Job { job: String, source: Box<Error> },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }

    /// Attach the id of the job (setup, seed, record) that failed.
    pub fn in_job(self, job: impl Into<String>) -> Self {
        Error::Job {
            job: job.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 config, 3 numeric failure, 4 protocol misuse, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonFinite(_) => 3,
            Error::Protocol(_) => 4,
            Error::Job { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
