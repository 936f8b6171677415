use alloc::string::String;

/// Errors raised by graph construction, calculus, basis construction and fitting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },
    #[error("need at least {required} {what}, got {found}")]
    TooFew {
        what: &'static str,
        required: usize,
        found: usize,
    },
    #[error("non-finite value in {context} at position {index}")]
    NonFinite { context: &'static str, index: usize },
    #[error("vertices {i} and {j} have identical state vectors")]
    DuplicateState { i: usize, j: usize },
    #[error("self distance requested for vertex {0}; self edges are excluded")]
    SelfEdge(usize),
    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("column `{0}` is identically zero; its normalizer is undefined")]
    ZeroColumn(String),
    #[error("weight table is not a valid symmetric nonnegative table: {0}")]
    InvalidWeights(String),
    #[error("descriptor lists differ between bases")]
    DescriptorMismatch,
    #[error("integer overflow evaluating {0}")]
    Overflow(&'static str),
    #[error("series time stamps are not strictly increasing at sample {0}")]
    NonMonotoneTime(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
