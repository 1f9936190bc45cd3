use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown symbol {symbol} at record {record}, position {position}")]
    UnknownSymbol {
        symbol: char,
        record: String,
        position: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("xt does not contain x0 as a subsequence")]
    NoAlignment,

    #[error("weight singular at t=0")]
    SingularWeight,

    #[error("nothing to denoise")]
    NothingToDenoise,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
