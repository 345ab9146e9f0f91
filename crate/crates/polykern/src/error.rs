//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slot index {index} out of range 1..={len}")]
    SlotOutOfRange { index: usize, len: usize },

    #[error("value does not inhabit the expected space: {0}")]
    ValueNotInSpace(String),

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("kernel pair is not closed under exact composition ({0}); build a diagram and evaluate by trace instead")]
    NotClosed(String),

    #[error("kernel is not representable as a finite table: {0}")]
    NotFinite(String),

    #[error("kernel has no density (pathwise-only kernel)")]
    NoDensity,

    #[error("zero-probability outcome at a density evaluation: {0}")]
    ZeroDensity(String),

    #[error("diagram is cyclic")]
    Cyclic,

    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    #[error("invalid topological order: {0}")]
    InvalidOrder(String),

    #[error("joint outcome space too large to enumerate ({size} > {limit})")]
    EnumerationTooLarge { size: u128, limit: u128 },

    #[error("interface witness {witness} is not admissible from {from} to {to}")]
    InadmissibleWitness {
        witness: String,
        from: String,
        to: String,
    },

    #[error("pathwise-inadmissible: {0}")]
    PathwiseInadmissible(String),

    #[error("unknown reference: {0}")]
    UnknownRef(String),

    #[error("invalid fixture or project data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}
