use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("snapshot rejected: {0}")]
    Snapshot(String),

    #[error("cholesky factorization failed ({context}) after jitter up to {max_jitter:e}")]
    Cholesky { context: String, max_jitter: f64 },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("campaign aborted at iteration {iteration}: {reason}")]
    Aborted { iteration: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
