use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `NA` is the negative label and never becomes a stored edge.
    #[error("the NA label cannot be stored as an edge")]
    NALabelRejected,

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid record: {0}")]
    Record(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("embeddings are not comparable: {0}")]
    Incomparable(String),

    #[error("missing gold labels for decision ids: {}", .0.join(", "))]
    MissingGold(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input files.
    pub fn is_input_format(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Json(_) | Error::Record(_))
    }
}
