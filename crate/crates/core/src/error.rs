use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("timescale must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    BadData {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged at step {step} ({detail})")]
    Diverged { step: usize, detail: String },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn bad_data(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::BadData {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
