//! Attack analysis: brute-force success probability on the unit sphere with
//! a Monte-Carlo cross-check, and the learned inverse-mapping attack.

mod cap;
mod inverse;

pub use cap::{CapAnalysis, CapEstimate, TrialCount, cap_grid_csv, cap_probability, ln_cap_probability, monte_carlo_cap, required_trials};
pub use inverse::{
    InverseAttackConfig, InverseAttackTrace, InverseMode, generate_inverse_nearby, generate_inverse_random,
    train_inverse_attack,
};

use thiserror::Error;

use crate::del::DelError;
use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("success probability is zero: no finite number of trials suffices")]
    InfiniteTrials,
    #[error("Monte-Carlo run infeasible: expected {expected_hits:.3e} hits in {trials} trials, need at least {min_hits}")]
    Infeasible { expected_hits: f64, trials: u64, min_hits: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("attacker training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error(transparent)]
    Del(#[from] DelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
