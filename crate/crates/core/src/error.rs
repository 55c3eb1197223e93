use alloc::string::String;

/// Errors produced by the adaptation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("invalid token id {id} (vocabulary size {size})")]
    InvalidTokenId { id: usize, size: usize },
    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape mismatch for parameter `{name}`")]
    ShapeMismatch { name: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("untranslatable segment")]
    Untranslatable,
    #[error("length mismatch: {left} hypotheses vs {right} references")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty reference")]
    EmptyReference,
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("events out of order in segment `{0}`")]
    OutOfOrder(String),
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("document mismatch: {0}")]
    DocumentMismatch(String),
    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
