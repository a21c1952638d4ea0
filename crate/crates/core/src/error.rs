use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("poset must have at least one element")]
    EmptyPoset,

    #[error("element {element} out of range for a {n}-element poset")]
    ElementOutOfRange { element: usize, n: usize },

    #[error("pair ({x}, {y}) is not ordered: expected x < y")]
    UnorderedPair { x: usize, y: usize },

    #[error("a random stream is required to build a {0} start")]
    MissingRng(&'static str),

    #[error("operation needs at least {needed} elements, got {n}")]
    TooFewElements { needed: usize, n: usize },

    #[error("malformed relation matrix: {0}")]
    MalformedMatrix(String),

    #[error("n = {n} exceeds the bound {bound} for {what}")]
    BoundExceeded { what: &'static str, n: usize, bound: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
