use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::run::settle_period;
use super::SimError;
use crate::chain::{
    Block, ConsensusParams, Ledger, PendingTuple, ProblemDefinition, Submission, TestTuple, TokenAmount,
    blocks_to_jsonl,
};
use crate::poi::{Address, BlobStore, Digest, PoiProof, VerificationProof};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", content = "index", rename_all = "kebab-case")]
pub enum Role {
    Committer,
    Contributor(usize),
    Improver(usize),
    Validator(usize),
    BadSignatureSubmitter,
    NonImprover,
    DuplicateVoter,
}

impl Role {
    pub fn is_adversary(self) -> bool {
        matches!(self, Role::BadSignatureSubmitter | Role::NonImprover | Role::DuplicateVoter)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Committer => write!(f, "committer"),
            Role::Contributor(i) => write!(f, "contributor-{i}"),
            Role::Improver(i) => write!(f, "improver-{i}"),
            Role::Validator(i) => write!(f, "validator-{i}"),
            Role::BadSignatureSubmitter => write!(f, "bad-signature-submitter"),
            Role::NonImprover => write!(f, "non-improver"),
            Role::DuplicateVoter => write!(f, "duplicate-voter"),
        }
    }
}

/// What happened. Payloads carry everything a replay needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    ProblemDefined {
        definition: ProblemDefinition,
        consensus: ConsensusParams,
    },
    TupleSubmitted {
        tuple: TestTuple,
    },
    ProblemCommitted {
        block: Digest,
    },
    DigestRegistered {
        period: usize,
        model: Digest,
    },
    ProofSubmitted {
        period: usize,
        proof: PoiProof,
    },
    ProofRejected {
        period: usize,
        model: Digest,
        reason: String,
        detail: String,
    },
    VoteDelivered {
        period: usize,
        vote: VerificationProof,
    },
    VoteLate {
        period: usize,
        model: Digest,
    },
    PeriodClosed {
        period: usize,
    },
    CommitRejected {
        period: usize,
        model: Digest,
        reason: String,
    },
    ImprovementCommitted {
        period: usize,
        block: Digest,
        model: Digest,
        #[serde(with = "crate::serde_dec")]
        distance: f64,
    },
    PeriodEmpty {
        period: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub tick: u64,
    pub actor: Address,
    /// Digest of the event's main payload, when it has one.
    pub payload: Option<Digest>,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Per-period summary. `true_error` is simulator-side knowledge (it needs
/// the hidden labels) and never reaches validators or the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodStats {
    pub period: usize,
    pub best_before: f64,
    pub best_after: f64,
    pub submissions: usize,
    /// `(model digest, unique endorsements)` per submission.
    pub votes: Vec<(Digest, usize)>,
    pub winner: Option<Address>,
    pub winner_model: Option<Digest>,
    pub distance: Option<f64>,
    pub true_error: Option<f64>,
    pub reward: Option<TokenAmount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub seed: u64,
    pub config_digest: Digest,
    pub roles: BTreeMap<Address, Role>,
    pub events: Vec<ScenarioEvent>,
    pub chain: Vec<Block>,
    pub balances: BTreeMap<Address, TokenAmount>,
    pub periods: Vec<PeriodStats>,
}

impl ScenarioTrace {
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// `period,winner,distance,true_error,reward`; empty fields for periods
    /// without a winner.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("period,winner,distance,true_error,reward\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for p in &self.periods {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.period,
                opt(p.winner.map(|a| a.to_string())),
                opt(p.distance.map(|d| d.to_string())),
                opt(p.true_error.map(|e| e.to_string())),
                opt(p.reward.map(|r| r.to_string())),
            ));
        }
        out
    }

    pub fn chain_jsonl(&self) -> String {
        blocks_to_jsonl(&self.chain)
    }

    pub fn role_of(&self, who: &Address) -> Option<Role> {
        self.roles.get(who).copied()
    }

    /// Replays the event log and checks the rebuilt chain and balances
    /// match the recorded ones bit for bit.
    pub fn verify_replay(&self, store: Option<&BlobStore>) -> Result<Ledger, SimError> {
        let ledger = replay_events(&self.events, store)?;
        if blocks_to_jsonl(ledger.blocks()) != self.chain_jsonl() {
            return Err(SimError::ReplayMismatch("rebuilt chain differs from the recorded chain".into()));
        }
        if ledger.balances() != &self.balances {
            return Err(SimError::ReplayMismatch("rebuilt balances differ".into()));
        }
        Ok(ledger)
    }
}

/// Rebuilds the ledger from an event log alone: tuples, proofs, delivered
/// votes and period boundaries are re-fed through the tally and commit path.
pub fn replay_events(events: &[ScenarioEvent], store: Option<&BlobStore>) -> Result<Ledger, SimError> {
    let mut ledger: Option<Ledger> = None;
    let mut definition: Option<ProblemDefinition> = None;
    let mut pending = Vec::new();
    let mut open: Vec<Submission> = Vec::new();
    let missing = |what: &str| SimError::ReplayMismatch(format!("{what} before the problem was defined"));

    for e in events {
        match &e.kind {
            EventKind::ProblemDefined {
                definition: d,
                consensus,
            } => {
                ledger = Some(Ledger::new(*consensus)?);
                definition = Some(d.clone());
            }
            EventKind::TupleSubmitted { tuple } => pending.push(PendingTuple {
                tick: e.tick,
                tuple: tuple.clone(),
            }),
            EventKind::ProblemCommitted { block } => {
                let l = ledger.as_mut().ok_or_else(|| missing("problem commit"))?;
                let def = definition.clone().ok_or_else(|| missing("problem commit"))?;
                let committed = match store {
                    Some(s) => l.commit_problem_block(&pending, def, s)?,
                    None => l.replay_problem_block(&pending, def)?,
                };
                if committed.hash != *block {
                    return Err(SimError::ReplayMismatch(format!(
                        "problem block hash {} but the log records {block}",
                        committed.hash
                    )));
                }
            }
            EventKind::ProofSubmitted { proof, .. } => open.push(Submission {
                proof: proof.clone(),
                first_tick: e.tick,
                votes: Vec::new(),
            }),
            EventKind::VoteDelivered { vote, .. } => {
                let sub = open
                    .iter_mut()
                    .find(|s| s.proof == vote.inner)
                    .ok_or_else(|| SimError::ReplayMismatch("vote for a proof not submitted this period".into()))?;
                sub.votes.push(vote.clone());
            }
            EventKind::PeriodClosed { .. } => {
                let l = ledger.as_mut().ok_or_else(|| missing("period close"))?;
                settle_period(l, std::mem::take(&mut open));
            }
            _ => {}
        }
    }
    ledger.ok_or_else(|| SimError::ReplayMismatch("event log never defines a problem".into()))
}
