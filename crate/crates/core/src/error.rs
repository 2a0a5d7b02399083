use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The variants are grouped into the categories the CLI maps onto exit
/// codes; see [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("state error: {0}")]
    State(String),

    #[error("numeric divergence in epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("undefined ROC: {0}")]
    UndefinedRoc(String),

    #[error("benchmark validity error: {0}")]
    BenchmarkValidity(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
    Format,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::BenchmarkValidity(_) => ErrorCategory::Config,
            Error::Data(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::Split(_)
            | Error::Shape(_)
            | Error::UndefinedRoc(_)
            | Error::State(_) => ErrorCategory::Data,
            Error::Divergence { .. } | Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Format(_) => ErrorCategory::Format,
            Error::Io(_) => ErrorCategory::Io,
            Error::File { source, .. } => source.category(),
        }
    }

    /// Attach a file path to an error while keeping its category.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
