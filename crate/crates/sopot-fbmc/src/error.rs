//! Crate-wide error type.

/// Errors produced by approximation, waveform, and I/O routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value or shape violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration is structurally valid but not supported.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// A matrix view was requested from a non-canonical approximation.
    #[error("approximation has more than one term at position {position}, depth {depth}; run merge_canonical first")]
    NotCanonical { position: usize, depth: u32 },

    /// Two containers that must agree in length do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file being read does not conform to its format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
