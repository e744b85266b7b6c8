use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("parse error at row {row}, field {field}: {value:?} is not a number")]
    Parse {
        row: usize,
        field: usize,
        value: String,
    },

    #[error("cannot decode {}: {msg}", path.display())]
    Decode { path: PathBuf, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(String),

    #[error("insufficient rank: requested {requested} components, {available} available")]
    InsufficientRank { requested: usize, available: usize },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
