use std::io;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants group into the four failure families the CLI reports through
/// distinct exit codes: validation, numerical, similarity, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("similarity is undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code for this error: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::EmptyVocabulary | Error::UndefinedSimilarity(_) => 2,
            Error::NotPositiveDefinite { .. } | Error::Numerical(_) => 3,
            Error::Io(_) | Error::Format { .. } | Error::Json(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
