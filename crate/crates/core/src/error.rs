use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] io::Error),

    /// A record in a line-oriented input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid index file: {0}")]
    IndexFormat(String),

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("empty query")]
    EmptyQuery,

    #[error("unknown document: {0}")]
    UnknownDocument(String),

    #[error("document ordinal {ordinal} out of range (collection has {num_docs} documents)")]
    InvalidOrdinal { ordinal: usize, num_docs: usize },

    #[error("document {0} has no terms")]
    EmptyDocument(String),

    #[error("document has no relevant queries")]
    NoRelevantQueries,

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("undefined Gini (zero total)")]
    ZeroTotal,

    #[error("negative score {0}")]
    NegativeScore(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {0} != {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate input")]
    DegenerateInput,

    #[error("fingerprint mismatch on {key}: {left} != {right}")]
    FingerprintMismatch {
        key: String,
        left: String,
        right: String,
    },

    #[error("no overlapping documents")]
    NoOverlap,

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
