use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("count vector sums to zero (empty window)")]
    AllZeroVector,

    #[error("sample is empty")]
    EmptySample,

    #[error("sample has zero total count")]
    ZeroTotal,

    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("input is not sorted by timestamp: {current} follows {previous}")]
    UnsortedInput { previous: i64, current: i64 },

    #[error("vector element must be strictly positive (index {index}, value {value})")]
    NonPositiveInput { index: usize, value: f64 },

    #[error("invalid count at index {index}: {value}")]
    InvalidCount { index: usize, value: f64 },

    #[error("count at index {index} is not an integer: {value}")]
    NonIntegerCount { index: usize, value: f64 },

    #[error("pool {0} is empty")]
    EmptyPool(&'static str),

    #[error("detection {detection} falls inside the grace period (g = {grace})")]
    InvalidDetection { detection: u64, grace: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid template set: {0}")]
    InvalidTemplateSet(String),

    #[error("training window {window_index} has {count} unmatched lines")]
    UnknownInTraining { window_index: u64, count: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Regex(#[from] regex::Error),
}

impl Error {
    /// True for violations of a data invariant (as opposed to malformed input).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::UnknownInTraining { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
