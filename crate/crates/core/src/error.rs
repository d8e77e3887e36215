use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the fusion engine and the log/report IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("time {t} s is outside the scenario window [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("position coincides with the antenna; radial direction is undefined")]
    CoincidentPosition,

    #[error("positions share timestamp {0} s; velocity is undefined")]
    CoincidentTimestamps(f64),

    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no tag {0} in scenario")]
    UnknownTag(u32),

    #[error("empty log: {0}")]
    EmptyLog(&'static str),

    #[error("malformed log {path}: {message}")]
    Log { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation { .. } | Error::UnknownTag(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
