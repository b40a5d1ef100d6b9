use alloc::string::String;

/// Errors produced by the cryptographic and protocol layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("group generation failed: {0}")]
    GroupGeneration(&'static str),
    #[error("invalid group parameters: {0}")]
    InvalidGroup(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("no discrete logarithm within [-{bound}, {bound}]")]
    DlogOutOfBound { bound: u64 },
    #[error("dlog bound {bound} does not fit the group order (must be below q/2)")]
    BoundTooLarge { bound: u128 },
    #[error("unknown MIFE slot {0}")]
    UnknownSlot(usize),
    #[error("ciphertext missing for slot {0} with nonzero weight")]
    MissingSlot(usize),
    #[error("derived key does not match the supplied vector")]
    KeyMismatch,
    #[error("value {value} exceeds encodable bound {bound}")]
    Overflow { value: f64, bound: f64 },
    #[error("key request rejected: {0}")]
    Rejected(String),
    #[error("quorum not met: {live} live parties, threshold {threshold}")]
    Quorum { live: usize, threshold: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("batch needs {needed} rows but only {available} are aligned")]
    Batch { needed: usize, available: usize },
    #[error("entity resolution failed: {0}")]
    Resolution(&'static str),
    #[error("label {0} is outside the model's label convention")]
    Label(f64),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: u32 },
    #[error("malformed message: {0}")]
    Wire(&'static str),
    #[error("no channel between {from} and {to}")]
    Topology { from: String, to: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
