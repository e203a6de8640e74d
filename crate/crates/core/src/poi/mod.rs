//! Proof-of-Improvement: digests, peer identities, the content-addressed
//! blob store, lookup-model artifacts, and the prove/verify procedures.
//!
//! Nothing in this module sees the test label vector; verification works
//! from the published embedding `y_t` alone.

mod artifact;
mod digest;
mod identity;
mod proof;
mod store;
pub(crate) mod wire;

pub use artifact::ModelArtifact;
pub use digest::{Address, Digest, digest};
pub use identity::{PeerIdentity, PublicKey, SignatureBytes, keygen, verify_signature};
pub use proof::{EMBEDDING_TOLERANCE, PoiProof, VerificationProof, prove, verify};
pub use store::BlobStore;

use thiserror::Error;

use crate::del::DelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoiError {
    #[error("BadSignature: {0}")]
    BadSignature(String),
    #[error("DigestMismatch: proof commits to {claimed}, model hashes to {actual}")]
    DigestMismatch { claimed: Digest, actual: Digest },
    #[error("EmbeddingMismatch: component {index} differs by {difference:e}")]
    EmbeddingMismatch { index: usize, difference: f64 },
    #[error("InsufficientImprovement: distance {distance} is not below {d_c} - {delta}")]
    InsufficientImprovement { distance: f64, d_c: f64, delta: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed encoding: {0}")]
    Encoding(String),
    #[error(transparent)]
    Del(#[from] DelError),
}

impl PoiError {
    /// Stable name of the failure class.
    pub fn kind(&self) -> &'static str {
        match self {
            PoiError::BadSignature(_) => "BadSignature",
            PoiError::DigestMismatch { .. } => "DigestMismatch",
            PoiError::EmbeddingMismatch { .. } => "EmbeddingMismatch",
            PoiError::InsufficientImprovement { .. } => "InsufficientImprovement",
            PoiError::Contract(_) => "ContractViolation",
            PoiError::Encoding(_) => "MalformedEncoding",
            PoiError::Del(_) => "ModelError",
        }
    }
}
