use thiserror::Error;

/// Errors raised when an operation's precondition is not met.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state vector is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("distribution has no entries")]
    EmptyDistribution,

    #[error("distribution over zero-length strings has no rate")]
    ZeroLength,

    #[error("invalid probability table: {0}")]
    InvalidDistribution(String),

    #[error("{bits} bits exceeds the enumeration cap of {cap} bits")]
    CapExceeded { bits: usize, cap: usize },

    #[error("conditioning prefix has zero probability")]
    ZeroProbabilityPrefix,

    #[error("invalid source tree: {0}")]
    InvalidTree(String),

    #[error("invalid attack tree: {0}")]
    InvalidAttack(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("round count must be even, got {0}")]
    OddRounds(usize),

    #[error("rate {rate} does not exceed the full-cheating threshold {threshold}")]
    RateBelowThreshold { rate: f64, threshold: f64 },

    #[error("subset size {s} exceeds honest round count {k}")]
    SubsetTooLarge { s: usize, k: usize },

    #[error("vertex {0} is honest and cannot be augmented")]
    HonestVertex(usize),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("Monte Carlo run requested with zero trials")]
    ZeroTrials,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
