use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("{path}: invalid UTF-8 on line {line} at byte offset {offset}")]
    FileDecode {
        path: PathBuf,
        line: usize,
        offset: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid rule set: {0}")]
    InvalidRules(String),

    #[error("invalid merge sequence at rank {rank}: unknown operand {operand:?}")]
    InvalidMerge { rank: usize, operand: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model checksum failure: {0}")]
    Checksum(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("token id {id} at position {position} is outside the vocabulary (size {vocab_size})")]
    IdOutOfRange {
        id: u32,
        position: usize,
        vocab_size: usize,
    },

    #[error("unit {unit:?} has zero probability under the unigram model")]
    ZeroProbability { unit: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed token stream on line {line}: {message}")]
    Adapter { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
