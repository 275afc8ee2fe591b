use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {layer}")]
    Numeric { layer: &'static str },

    #[error("cannot split {available} samples across {requested} devices")]
    Sizing { requested: usize, available: usize },

    #[error("empty shard")]
    EmptyShard,

    #[error("contribution with zero sample count")]
    ZeroWeight,

    #[error("finalise called on an empty accumulator")]
    EmptyAccumulator,

    #[error("device {receiver} is out of range of device {sender}")]
    RangeViolation { sender: usize, receiver: usize },

    #[error("pairing violation: {0}")]
    PairingViolation(String),

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance")]
    Eigen { residual: f64 },

    #[error("disconnected graph: {0}")]
    Disconnected(String),

    #[error("mixing did not reach consensus within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{name}`; valid presets: {}", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
