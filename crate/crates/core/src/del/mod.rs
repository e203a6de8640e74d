//! Distance Embedding for Labels: label vectors, the error and modified
//! cosine distance, perturbation sampling, training and evaluation of the
//! `x_t`-specific embedding network.

mod embedding;
mod labels;
mod model;
mod train;

pub use embedding::{EmbeddingVector, distance, raw_distance};
pub use labels::{LabelVector, generate_data, label_error};
pub use model::{DelModel, DelModelDocument, EncodedInput, InputEncoding};
pub use train::{CorrelationReport, DelTrainConfig, EpochLoss, TrainTrace, eval_del, pearson, train_del};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("class count mismatch: expected {expected}, got {actual}")]
    ClassMismatch { expected: u16, actual: u16 },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("malformed model document: {0}")]
    Format(String),
}
