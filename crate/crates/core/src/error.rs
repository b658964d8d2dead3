use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid norming sequence: {0}")]
    InvalidNorming(String),

    /// The ratio b_n / a_n decreases between `index - 1` and `index` (1-based).
    #[error("ratio b_n/a_n decreases at n = {index} ({previous} -> {current})")]
    RatioDecreasing {
        index: usize,
        previous: f64,
        current: f64,
    },

    #[error("argument {value} outside domain [{low}, {high}]")]
    Domain { value: f64, low: f64, high: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error(
        "exact enumeration of {patterns} patterns exceeds the limit of {limit}; use Monte Carlo"
    )]
    EnumerationTooLarge { patterns: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0} is not available in closed form")]
    NoClosedForm(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
