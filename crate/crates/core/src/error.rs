//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("polynomial is not invertible in the requested quotient ring")]
    NotInvertible,

    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    #[error("reduction error: {0}")]
    Reduction(String),

    #[error("external tool error: {0}")]
    ExternalTool(String),

    #[error("lattice integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}
