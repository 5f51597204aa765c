use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid sample value {value}")]
    InvalidSample { value: f64 },

    #[error("non-monotonic time: t = {t} does not follow previous t = {last}")]
    NonMonotonicTime { last: f64, t: f64 },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ray does not intersect the panel plane (angle {angle_deg} deg)")]
    BehindPlane { angle_deg: f64 },

    #[error("sample rate {rate_hz} Hz aliases tremor at {tremor_hz} Hz")]
    Aliasing { rate_hz: f64, tremor_hz: f64 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("{file}: `{field}`: {reason}")]
    Config {
        file: PathBuf,
        field: String,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used on the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::InvalidSample { .. } => "invalid-sample",
            Error::NonMonotonicTime { .. } => "non-monotonic-time",
            Error::AtSample { source, .. } => source.kind(),
            Error::BehindPlane { .. } => "behind-plane",
            Error::Aliasing { .. } => "aliasing",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::InvalidTask(_) => "invalid-task",
            Error::Config { .. } => "config",
            Error::MalformedRow { .. } => "malformed-row",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
