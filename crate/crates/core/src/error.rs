use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training data contains {0} window(s) that are severe or unlabeled")]
    Contamination(usize),

    #[error(
        "degenerate thresholds: normal max distance {t_normal} exceeds degraded max distance {t_degraded}"
    )]
    DegenerateThresholds { t_normal: f64, t_degraded: f64 },

    #[error("architecture error: {0}")]
    Architecture(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("split fingerprint mismatch: {expected} vs {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::Contamination(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::FingerprintMismatch { .. } => 3,
            Error::Shape { .. }
            | Error::NonFinite(_)
            | Error::DegenerateThresholds { .. }
            | Error::Architecture(_)
            | Error::Checkpoint(_)
            | Error::Json(_) => 4,
        }
    }
}
