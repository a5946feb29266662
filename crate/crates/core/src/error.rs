use thiserror::Error;

/// Errors raised while building, querying or persisting an index.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} exceeds the configured maximum of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no points")]
    NoPoints,

    #[error("duplicate sites {first} and {second}")]
    DuplicateSite { first: usize, second: usize },

    #[error("site index {index} out of range for {len} sites")]
    SiteOutOfRange { index: usize, len: usize },

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("capacity exceeded: {what} needs at least {needed} nodes, budget is {budget}")]
    Capacity {
        what: &'static str,
        needed: u64,
        budget: u64,
    },

    #[error("unsupported dimension {0}: only 2-D indexes can be rendered")]
    UnsupportedDimension(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed index file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
