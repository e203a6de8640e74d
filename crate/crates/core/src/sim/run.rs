use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::synth::synth_model;
use super::trace::{EventKind, PeriodStats, Role, ScenarioEvent, ScenarioTrace};
use super::SimError;
use crate::chain::{
    ChainError, DigestRegistry, ImprovementBlock, Ledger, PendingTuple, ProblemDefinition, Submission, TestTuple,
    tally, unique_voters,
};
use crate::del::{DelModel, EmbeddingVector, LabelVector, distance, label_error, train_del};
use crate::poi::{
    Address, BlobStore, Digest, ModelArtifact, PeerIdentity, VerificationProof, digest, keygen, prove, verify,
};

/// Everything a run produces. Only `trace` is public protocol data; the
/// hidden labels, the models and the store are kept for the harness.
#[derive(Debug)]
pub struct ScenarioRun {
    pub trace: ScenarioTrace,
    pub x_t: LabelVector,
    pub del: DelModel<f64>,
    pub store: BlobStore,
    /// Every released model, by digest.
    pub models: BTreeMap<Digest, ModelArtifact>,
}

/// Outcome of closing one competition period.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub committed: Option<ImprovementBlock>,
    /// Tally winners the ledger refused, with the reason, in order.
    pub refused: Vec<(Digest, ChainError)>,
}

/// Tallies `submissions` and commits the best one the ledger accepts,
/// falling back to the next in tally order on refusal.
pub fn settle_period(ledger: &mut Ledger, mut submissions: Vec<Submission>) -> Settlement {
    let mut refused = Vec::new();
    while let Some(i) = tally(&submissions) {
        match ledger.commit_improvement_block(&submissions[i]) {
            Ok(block) => {
                return Settlement {
                    committed: Some(block.clone()),
                    refused,
                };
            }
            Err(e) => {
                refused.push((submissions[i].proof.g, e));
                submissions.remove(i);
            }
        }
    }
    Settlement {
        committed: None,
        refused,
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A vote in flight on the bus.
struct Pending {
    deliver_at: u64,
    sender: Address,
    seq: u64,
    vote: VerificationProof,
}

/// A model an improver intends to submit this period.
struct Planned {
    submitter: usize,
    model: ModelArtifact,
    corrupt_signature: bool,
    honest_slot: Option<(usize, usize)>,
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    events: Vec<ScenarioEvent>,
    roles: BTreeMap<Address, Role>,
}

impl World<'_> {
    fn emit(&mut self, tick: u64, actor: Address, payload: Option<Digest>, kind: EventKind) {
        self.events.push(ScenarioEvent {
            tick,
            actor,
            payload,
            kind,
        });
    }
}

/// Runs the problem-definition period and `cfg.periods` competition periods
/// on a single-threaded tick loop. Identical configs give identical traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, SimError> {
    cfg.validate()?;
    let params = cfg.consensus;
    let setup = &cfg.del;
    let mut label_rng = stream(cfg.seed, 0);
    let mut key_rng = stream(cfg.seed, 1);
    let mut model_rng = stream(cfg.seed, 2);
    let mut latency_rng = stream(cfg.seed, 3);

    let x_t = LabelVector::random(setup.m, setup.num_classes, &mut label_rng)?;

    let committer = keygen(&mut key_rng);
    let contributors: Vec<PeerIdentity> = (0..cfg.contributors).map(|_| keygen(&mut key_rng)).collect();
    let improvers: Vec<PeerIdentity> = (0..cfg.improvers.len()).map(|_| keygen(&mut key_rng)).collect();
    let validators: Vec<PeerIdentity> = (0..cfg.validators).map(|_| keygen(&mut key_rng)).collect();
    let bad_signer = keygen(&mut key_rng);
    let non_improver = keygen(&mut key_rng);
    let duplicate_voter = keygen(&mut key_rng);

    let mut world = World {
        cfg,
        events: Vec::new(),
        roles: BTreeMap::new(),
    };
    world.roles.insert(committer.address(), Role::Committer);
    for (i, p) in contributors.iter().enumerate() {
        world.roles.insert(p.address(), Role::Contributor(i));
    }
    for (i, p) in improvers.iter().enumerate() {
        world.roles.insert(p.address(), Role::Improver(i));
    }
    for (i, p) in validators.iter().enumerate() {
        world.roles.insert(p.address(), Role::Validator(i));
    }
    let adv = cfg.adversaries;
    if adv.bad_signature {
        world.roles.insert(bad_signer.address(), Role::BadSignatureSubmitter);
    }
    if adv.non_improver {
        world.roles.insert(non_improver.address(), Role::NonImprover);
    }
    if adv.duplicate_voter {
        world.roles.insert(duplicate_voter.address(), Role::DuplicateVoter);
    }

    // Problem-definition period: the designated contributor (index 0)
    // trains the DEL function on the hidden labels; any further contributor
    // publishes a tuple for its own hidden labels.
    let store = BlobStore::new();
    let definition = ProblemDefinition {
        id: format!("synthetic-{}x{}", setup.m, setup.num_classes),
        input_spec: format!("{} synthetic test inputs (stand-in for a labelled test set)", setup.m),
        num_classes: setup.num_classes,
        m: setup.m,
    };
    world.emit(
        0,
        contributors[0].address(),
        None,
        EventKind::ProblemDefined {
            definition: definition.clone(),
            consensus: params,
        },
    );
    let mut pending = Vec::new();
    let mut del = None;
    for (k, contributor) in contributors.iter().enumerate() {
        let labels = if k == 0 {
            x_t.clone()
        } else {
            LabelVector::random(setup.m, setup.num_classes, &mut label_rng)?
        };
        let train_cfg = crate::del::DelTrainConfig {
            seed: setup.train.seed + k as u64,
            ..setup.train.clone()
        };
        let (f, _) = train_del::<f64>(&labels, setup.n, &train_cfg)?;
        let inputs = format!("test inputs of contributor {k} for {}", definition.id);
        let tuple = TestTuple {
            z_ref: store.put(inputs.as_bytes()),
            f_ref: store.put(&f.to_bytes()),
            y_t: f.embed(&labels)?,
        };
        let tick = (k as u64).min(params.t_p - 1);
        world.emit(
            tick,
            contributor.address(),
            Some(tuple.digest()),
            EventKind::TupleSubmitted { tuple: tuple.clone() },
        );
        pending.push(PendingTuple { tick, tuple });
        if k == 0 {
            del = Some(f);
        }
    }
    let del = del.expect("at least one contributor");

    let mut ledger = Ledger::new(params)?;
    let genesis_hash = ledger.commit_problem_block(&pending, definition, &store)?.hash;
    world.emit(
        params.t_p - 1,
        committer.address(),
        Some(genesis_hash),
        EventKind::ProblemCommitted { block: genesis_hash },
    );

    // Everyone works from the published tuple, fetched back from the chain
    // and the store.
    let published = &ledger.problem_block().expect("committed").tuples[0];
    let f = DelModel::<f64>::from_bytes(&store.get(&published.f_ref).ok_or(ChainError::MissingBlob(published.f_ref))?)?;
    let y_t: EmbeddingVector<f64> = published.y_t.clone();

    // Honest improvers' models, one per schedule entry, with the distance
    // each improver measures locally before deciding to submit.
    let mut honest: Vec<Vec<(ModelArtifact, f64)>> = Vec::new();
    for (i, schedule) in cfg.improvers.iter().enumerate() {
        let mut mine = Vec::new();
        for (j, &e) in schedule.iter().enumerate() {
            let mut model = synth_model(&x_t, e, &mut model_rng)?;
            model.metadata = format!("improver {i} model {j}; {}", model.metadata);
            let d = distance(&f.embed(&model.predicted_labels)?, &y_t)?;
            mine.push((model, d));
        }
        honest.push(mine);
    }
    let strong_forgery = synth_model(&x_t, 0.0, &mut model_rng)?;
    let mut won: BTreeSet<(usize, usize)> = BTreeSet::new();

    let mut registry = DigestRegistry::new();
    let mut models: BTreeMap<Digest, ModelArtifact> = BTreeMap::new();
    let mut periods = Vec::new();
    let mut seq = 0u64;

    for period in 0..cfg.periods {
        let start = params.t_p + period as u64 * params.t_b;
        let close = start + params.t_b - 1;
        let best = ledger.best_distance();
        let threshold = best - params.delta;

        // Tick `start`: decide and register digests.
        let mut planned: Vec<Planned> = Vec::new();
        for (i, mine) in honest.iter().enumerate() {
            let candidate = mine
                .iter()
                .enumerate()
                .take(period + 1)
                .filter(|(j, (_, d))| !won.contains(&(i, *j)) && *d < threshold)
                .min_by(|a, b| a.1.1.total_cmp(&b.1.1).then(a.0.cmp(&b.0)));
            if let Some((j, (model, _))) = candidate {
                planned.push(Planned {
                    submitter: i,
                    model: model.clone(),
                    corrupt_signature: false,
                    honest_slot: Some((i, j)),
                });
            }
        }
        let bad_idx = improvers.len();
        let free_idx = improvers.len() + 1;
        if adv.bad_signature {
            let mut model = strong_forgery.clone();
            model.metadata = format!("forged submission, period {period}");
            planned.push(Planned {
                submitter: bad_idx,
                model,
                corrupt_signature: true,
                honest_slot: None,
            });
        }
        if adv.non_improver
            && let Some(last) = last_winner_model(&ledger, &store)?
        {
            let mut copy = last;
            copy.metadata = format!("relabelled copy, period {period}");
            planned.push(Planned {
                submitter: free_idx,
                model: copy,
                corrupt_signature: false,
                honest_slot: None,
            });
        }
        let identity = |k: usize| -> &PeerIdentity {
            match k {
                k if k < improvers.len() => &improvers[k],
                k if k == bad_idx => &bad_signer,
                _ => &non_improver,
            }
        };
        for p in &planned {
            let who = identity(p.submitter);
            let g = p.model.digest();
            registry.register(g, start, who.address())?;
            world.emit(start, who.address(), Some(g), EventKind::DigestRegistered { period, model: g });
        }

        // Tick `start + 1`: release blobs and proofs; validators verify.
        let release = start + 1;
        let mut submissions: Vec<Submission> = Vec::new();
        let mut bus: Vec<Pending> = Vec::new();
        let mut slot_of: BTreeMap<Digest, (usize, usize)> = BTreeMap::new();
        for p in &planned {
            let who = identity(p.submitter);
            let bytes = p.model.canonical_bytes();
            let g = store.put(&bytes);
            models.insert(g, p.model.clone());
            let mut proof = prove(&p.model, &f, who)?;
            if p.corrupt_signature {
                proof.sig[0] ^= 0x01;
            }
            if let Some(slot) = p.honest_slot {
                slot_of.insert(g, slot);
            }
            world.emit(
                release,
                who.address(),
                Some(proof.id()),
                EventKind::ProofSubmitted {
                    period,
                    proof: proof.clone(),
                },
            );
            submissions.push(Submission {
                proof,
                first_tick: release,
                votes: Vec::new(),
            });
        }

        let mut voters: Vec<(&PeerIdentity, usize)> = validators.iter().map(|v| (v, 1)).collect();
        if adv.duplicate_voter {
            voters.push((&duplicate_voter, 2));
        }
        for sub in &submissions {
            for &(validator, copies) in &voters {
                let outcome = registry
                    .check_release(&sub.proof.g, release, sub.proof.prover_address())
                    .map_err(|e| ("NotPreRegistered".to_string(), e.to_string()))
                    .and_then(|()| {
                        let blob = store
                            .get(&sub.proof.g)
                            .ok_or_else(|| ("MissingBlob".to_string(), sub.proof.g.to_string()))?;
                        let model = ModelArtifact::from_canonical_bytes(&blob)
                            .map_err(|e| (e.kind().to_string(), e.to_string()))?;
                        verify(&model, &sub.proof, &f, &y_t, best, params.delta, validator)
                            .map_err(|e| (e.kind().to_string(), e.to_string()))
                    });
                match outcome {
                    Ok(vote) => {
                        let latency = latency_rng.random_range(1..=cfg.max_vote_latency);
                        for _ in 0..copies {
                            bus.push(Pending {
                                deliver_at: release + latency,
                                sender: validator.address(),
                                seq,
                                vote: vote.clone(),
                            });
                            seq += 1;
                        }
                    }
                    Err((reason, detail)) => world.emit(
                        release,
                        validator.address(),
                        Some(sub.proof.id()),
                        EventKind::ProofRejected {
                            period,
                            model: sub.proof.g,
                            reason,
                            detail,
                        },
                    ),
                }
            }
        }

        // Ticks up to `close`: deliver votes in (tick, sender, send order).
        bus.sort_by_key(|m| (m.deliver_at, m.sender, m.seq));
        for msg in bus {
            if msg.deliver_at > close {
                world.emit(
                    close,
                    msg.sender,
                    Some(digest(&msg.vote.to_wire())),
                    EventKind::VoteLate {
                        period,
                        model: msg.vote.inner.g,
                    },
                );
                continue;
            }
            world.emit(
                msg.deliver_at,
                msg.sender,
                Some(digest(&msg.vote.to_wire())),
                EventKind::VoteDelivered {
                    period,
                    vote: msg.vote.clone(),
                },
            );
            if let Some(sub) = submissions.iter_mut().find(|s| s.proof == msg.vote.inner) {
                sub.votes.push(msg.vote);
            }
        }

        // Tick `close`: tally and commit.
        world.emit(close, committer.address(), None, EventKind::PeriodClosed { period });
        let votes: Vec<(Digest, usize)> = submissions.iter().map(|s| (s.proof.g, unique_voters(s).len())).collect();
        let n_submissions = submissions.len();
        let settlement = settle_period(&mut ledger, submissions);
        for (g, err) in &settlement.refused {
            world.emit(
                close,
                committer.address(),
                Some(*g),
                EventKind::CommitRejected {
                    period,
                    model: *g,
                    reason: err.to_string(),
                },
            );
        }
        let mut stats = PeriodStats {
            period,
            best_before: best,
            best_after: ledger.best_distance(),
            submissions: n_submissions,
            votes,
            winner: None,
            winner_model: None,
            distance: None,
            true_error: None,
            reward: None,
        };
        match settlement.committed {
            Some(block) => {
                let g = block.winner.g;
                world.emit(
                    close,
                    committer.address(),
                    Some(block.hash),
                    EventKind::ImprovementCommitted {
                        period,
                        block: block.hash,
                        model: g,
                        distance: block.distance,
                    },
                );
                if let Some(slot) = slot_of.get(&g) {
                    won.insert(*slot);
                }
                let prover = block.winner.prover_address();
                stats.winner = Some(prover);
                stats.winner_model = Some(g);
                stats.distance = Some(block.distance);
                stats.true_error = Some(label_error(&models[&g].predicted_labels, &x_t)?);
                stats.reward = ledger
                    .credits()
                    .iter()
                    .find(|(n, who, _)| *n == block.number && *who == prover)
                    .map(|c| c.2);
            }
            None => world.emit(close, committer.address(), None, EventKind::PeriodEmpty { period }),
        }
        periods.push(stats);
    }

    let trace = ScenarioTrace {
        seed: cfg.seed,
        config_digest: digest(&serde_json::to_vec(world.cfg).expect("config serializes")),
        roles: world.roles,
        events: world.events,
        chain: ledger.blocks().to_vec(),
        balances: ledger.balances().clone(),
        periods,
    };
    Ok(ScenarioRun {
        trace,
        x_t,
        del,
        store,
        models,
    })
}

/// The model behind the most recent improvement, read back from the store.
fn last_winner_model(ledger: &Ledger, store: &BlobStore) -> Result<Option<ModelArtifact>, SimError> {
    let last = ledger.blocks().iter().rev().find_map(|b| match b {
        crate::chain::Block::Improvement(i) => Some(i.winner.g),
        _ => None,
    });
    match last {
        Some(g) => {
            let blob = store.get(&g).ok_or(ChainError::MissingBlob(g))?;
            Ok(Some(ModelArtifact::from_canonical_bytes(&blob)?))
        }
        None => Ok(None),
    }
}
