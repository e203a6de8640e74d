//! The ledger: Problem and Improvement blocks on a hash chain, vote tally,
//! the consensus parameters, rewards in fixed-point tokens, and replay.

mod block;
mod ledger;
mod reward;
mod types;

pub use block::{Block, ImprovementBlock, ProblemBlock, blocks_from_jsonl, blocks_to_jsonl};
pub use ledger::{DigestRegistry, Ledger, PendingTuple, Submission, tally, unique_voters, verify_chain};
pub use reward::{reward, reward_curve, reward_function, validator_reward};
pub use types::{ConsensusParams, ProblemDefinition, TestTuple, TokenAmount};

use thiserror::Error;

use crate::del::DelError;
use crate::poi::{Digest, PoiError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("commit rejected: {0}")]
    Commit(String),
    #[error("referenced blob {0} is not in the store")]
    MissingBlob(Digest),
    #[error("InsufficientImprovement: distance {distance} is not below {best} - {delta}")]
    InsufficientImprovement { distance: f64, best: f64, delta: f64 },
    #[error("digest {0} was not registered at least one tick before release")]
    NotPreRegistered(Digest),
    #[error("integrity failure at block {block}: {reason}")]
    Integrity { block: u64, reason: String },
    #[error("malformed chain file at line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error(transparent)]
    Poi(#[from] PoiError),
    #[error(transparent)]
    Del(#[from] DelError),
}
