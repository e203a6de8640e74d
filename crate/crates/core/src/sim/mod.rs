//! Deterministic multi-peer scenario runner: a contributor publishes the
//! test tuple, improvers submit proofs, validators verify and vote over an
//! ordered in-process bus, and a committer tallies and commits blocks.

mod config;
mod run;
mod synth;
mod trace;

pub use config::{AdversaryToggles, DelSetup, ScenarioConfig};
pub use run::{ScenarioRun, Settlement, run_scenario, settle_period};
pub use synth::synth_model;
pub use trace::{EventKind, PeriodStats, Role, ScenarioEvent, ScenarioTrace, replay_events};

use thiserror::Error;

use crate::chain::ChainError;
use crate::del::DelError;
use crate::poi::PoiError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Poi(#[from] PoiError),
    #[error(transparent)]
    Del(#[from] DelError),
}
