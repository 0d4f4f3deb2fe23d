use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value encountered at iteration {iteration}: {what}")]
    Divergence { iteration: usize, what: String },

    #[error("objective evaluation failed: {0}")]
    ObjectiveEvaluation(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("audio format error: {0}")]
    AudioFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// CLI exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Config(_)
            | Error::Unsupported(_)
            | Error::AudioFormat(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Divergence { .. } | Error::ObjectiveEvaluation(_) => 3,
        }
    }
}
