//! Decentralized model-improvement market core: label-distance embeddings,
//! attack analysis, proof-of-improvement, the block ledger and a
//! deterministic multi-peer simulator.
//!
//! The numerical layers (`numerics`, `del`, `attacks`) are generic over the
//! floating-point type through [`scalar::Scalar`]; the protocol layers
//! (`poi`, `chain`, `sim`) fix `f64`, since proofs carry IEEE-754 doubles
//! on the wire. Concrete aliases for both precisions live here.

// `!(x < y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod chain;
pub mod del;
pub mod numerics;
pub mod poi;
pub mod scalar;
pub mod serde_dec;
pub mod sim;

pub use scalar::Scalar;

pub type MlpParamsF32 = numerics::MlpParams<f32>;
pub type MlpParamsF64 = numerics::MlpParams<f64>;
pub type AdamStateF32 = numerics::AdamState<f32>;
pub type AdamStateF64 = numerics::AdamState<f64>;
pub type DelModelF32 = del::DelModel<f32>;
pub type DelModelF64 = del::DelModel<f64>;
pub type EmbeddingF32 = del::EmbeddingVector<f32>;
pub type EmbeddingF64 = del::EmbeddingVector<f64>;
