use std::collections::{BTreeMap, BTreeSet};

use super::block::{Block, ImprovementBlock, ProblemBlock};
use super::reward::{reward, validator_reward};
use super::types::{ConsensusParams, ProblemDefinition, TestTuple, TokenAmount};
use super::ChainError;
use crate::del::{DelModel, EmbeddingVector, distance};
use crate::poi::{Address, BlobStore, Digest, PoiProof, VerificationProof};

/// A test tuple submitted during the problem-definition period.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingTuple {
    pub tick: u64,
    pub tuple: TestTuple,
}

/// A PoI proof competing in the current period with the endorsements it has
/// received, in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub proof: PoiProof,
    pub first_tick: u64,
    pub votes: Vec<VerificationProof>,
}

/// Distinct addresses that endorsed `sub.proof`, in first-arrival order.
pub fn unique_voters(sub: &Submission) -> Vec<Address> {
    let mut seen = BTreeSet::new();
    sub.votes
        .iter()
        .filter(|v| v.inner == sub.proof)
        .map(VerificationProof::verifier_address)
        .filter(|a| seen.insert(*a))
        .collect()
}

/// Index of the submission with the most unique endorsements; ties go to
/// the earliest first tick, then the smallest model digest. `None` when no
/// submission has an endorsement.
pub fn tally(submissions: &[Submission]) -> Option<usize> {
    submissions
        .iter()
        .enumerate()
        .map(|(i, s)| (i, unique_voters(s).len(), s.first_tick, s.proof.g))
        .filter(|&(_, votes, _, _)| votes > 0)
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)))
        .map(|(i, ..)| i)
}

/// Digest-first rule: a model digest must be registered by its prover at
/// least one tick before the proof that reveals it is accepted.
#[derive(Debug, Clone, Default)]
pub struct DigestRegistry {
    entries: BTreeMap<Digest, (u64, Address)>,
}

impl DigestRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// First registration wins; re-registering one's own digest is a no-op.
    pub fn register(&mut self, g: Digest, tick: u64, owner: Address) -> Result<(), ChainError> {
        match self.entries.get(&g) {
            Some(&(_, existing)) if existing != owner => Err(ChainError::Commit(format!(
                "digest {g} already registered by {existing}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(g, (tick, owner));
                Ok(())
            }
        }
    }

    pub fn check_release(&self, g: &Digest, tick: u64, owner: Address) -> Result<(), ChainError> {
        match self.entries.get(g) {
            Some(&(registered, who)) if who == owner && registered < tick => Ok(()),
            _ => Err(ChainError::NotPreRegistered(*g)),
        }
    }
}

/// Single-writer chain state: committed blocks, best distance, balances.
#[derive(Debug, Clone)]
pub struct Ledger {
    params: ConsensusParams,
    blocks: Vec<Block>,
    y_t: Option<EmbeddingVector<f64>>,
    best: f64,
    balances: BTreeMap<Address, TokenAmount>,
    credits: Vec<(u64, Address, TokenAmount)>,
}

impl Ledger {
    pub fn new(params: ConsensusParams) -> Result<Self, ChainError> {
        params.validate()?;
        Ok(Self {
            params,
            blocks: Vec::new(),
            y_t: None,
            best: params.d_0,
            balances: BTreeMap::new(),
            credits: Vec::new(),
        })
    }

    pub fn params(&self) -> &ConsensusParams {
        &self.params
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn best_distance(&self) -> f64 {
        self.best
    }

    /// The embedding submissions are scored against (the first tuple's).
    pub fn target_embedding(&self) -> Option<&EmbeddingVector<f64>> {
        self.y_t.as_ref()
    }

    pub fn problem_block(&self) -> Option<&ProblemBlock> {
        match self.blocks.first() {
            Some(Block::Problem(p)) => Some(p),
            _ => None,
        }
    }

    pub fn balance(&self, who: &Address) -> TokenAmount {
        self.balances.get(who).copied().unwrap_or_default()
    }

    pub fn balances(&self) -> &BTreeMap<Address, TokenAmount> {
        &self.balances
    }

    /// `(block number, recipient, amount)` for every credit, in order.
    pub fn credits(&self) -> &[(u64, Address, TokenAmount)] {
        &self.credits
    }

    fn head_hash(&self) -> Digest {
        self.blocks.last().map_or(Digest::ZERO, Block::hash)
    }

    /// Commits the genesis block from the tuples submitted in the
    /// problem-definition period, ordered by (tick, tuple digest).
    pub fn commit_problem_block(
        &mut self,
        pending: &[PendingTuple],
        definition: ProblemDefinition,
        store: &BlobStore,
    ) -> Result<&ProblemBlock, ChainError> {
        self.build_problem_block(pending, definition, Some(store))
    }

    /// As [`Ledger::commit_problem_block`] without resolving blob
    /// references; for audit replays where the blobs are not at hand.
    pub fn replay_problem_block(
        &mut self,
        pending: &[PendingTuple],
        definition: ProblemDefinition,
    ) -> Result<&ProblemBlock, ChainError> {
        self.build_problem_block(pending, definition, None)
    }

    fn build_problem_block(
        &mut self,
        pending: &[PendingTuple],
        definition: ProblemDefinition,
        store: Option<&BlobStore>,
    ) -> Result<&ProblemBlock, ChainError> {
        if !self.blocks.is_empty() {
            return Err(ChainError::Commit("the problem block is already committed".into()));
        }
        if pending.is_empty() {
            return Err(ChainError::Commit("no test tuples were submitted".into()));
        }
        let mut ordered: Vec<(u64, Digest, &TestTuple)> =
            pending.iter().map(|p| (p.tick, p.tuple.digest(), &p.tuple)).collect();
        ordered.sort_by_key(|a| (a.0, a.1));
        let mut block = ProblemBlock {
            number: 0,
            parent: Digest::ZERO,
            consensus: self.params,
            definition,
            tuples: ordered.into_iter().map(|(.., t)| t.clone()).collect(),
            hash: Digest::ZERO,
        };
        block.hash = block.compute_hash();
        self.apply(Block::Problem(block), store)?;
        Ok(self.problem_block().expect("just committed"))
    }

    /// Commits `winner` if it still improves on the best distance by more
    /// than δ. Endorsements must reference the winner, carry valid
    /// signatures, and state the current `d_c` and δ; a verifier that
    /// endorsed the winner more than once is dropped entirely.
    pub fn commit_improvement_block(&mut self, winner: &Submission) -> Result<&ImprovementBlock, ChainError> {
        let y_t = self
            .y_t
            .as_ref()
            .ok_or_else(|| ChainError::Commit("no problem block yet".into()))?;
        winner.proof.check_signature()?;
        let d = distance(&winner.proof.y, y_t)?;
        if !(d < self.best - self.params.delta) {
            return Err(ChainError::InsufficientImprovement {
                distance: d,
                best: self.best,
                delta: self.params.delta,
            });
        }

        let endorsing: Vec<&VerificationProof> = winner
            .votes
            .iter()
            .filter(|v| {
                v.inner == winner.proof
                    && v.d_c == self.best
                    && v.delta == self.params.delta
                    && v.check_signatures().is_ok()
            })
            .collect();
        let mut counts: BTreeMap<Address, usize> = BTreeMap::new();
        for v in &endorsing {
            *counts.entry(v.verifier_address()).or_default() += 1;
        }
        let verifications: Vec<VerificationProof> = endorsing
            .into_iter()
            .filter(|v| counts[&v.verifier_address()] == 1)
            .cloned()
            .collect();
        if verifications.is_empty() {
            return Err(ChainError::Commit("no admissible verification proofs".into()));
        }

        let mut block = ImprovementBlock {
            number: self.blocks.len() as u64,
            parent: self.head_hash(),
            winner: winner.proof.clone(),
            verifications,
            distance: d,
            hash: Digest::ZERO,
        };
        block.hash = block.compute_hash();
        self.apply(Block::Improvement(block), None)?;
        match self.blocks.last() {
            Some(Block::Improvement(b)) => Ok(b),
            _ => unreachable!("improvement block just appended"),
        }
    }

    /// Validates `block` against the current state and appends it,
    /// crediting rewards. Blob references are checked when a store is given.
    fn apply(&mut self, block: Block, store: Option<&BlobStore>) -> Result<(), ChainError> {
        let expected_number = self.blocks.len() as u64;
        if block.number() != expected_number {
            return Err(ChainError::Commit(format!(
                "block number {} where {expected_number} was expected",
                block.number()
            )));
        }
        if block.parent() != self.head_hash() {
            return Err(ChainError::Commit("parent hash does not match the previous block".into()));
        }
        if block.hash() != block.compute_hash() {
            return Err(ChainError::Commit("stored hash does not match the block contents".into()));
        }
        match &block {
            Block::Problem(p) => self.apply_problem(p, store)?,
            Block::Improvement(b) => self.apply_improvement(b)?,
        }
        self.blocks.push(block);
        Ok(())
    }

    fn apply_problem(&mut self, p: &ProblemBlock, store: Option<&BlobStore>) -> Result<(), ChainError> {
        if p.number != 0 {
            return Err(ChainError::Commit("a chain must start with its problem block".into()));
        }
        if p.consensus != self.params {
            return Err(ChainError::Commit("block consensus parameters differ from the ledger's".into()));
        }
        p.definition.validate()?;
        let first = p
            .tuples
            .first()
            .ok_or_else(|| ChainError::Commit("problem block without test tuples".into()))?;
        if let Some(store) = store {
            for t in &p.tuples {
                let z = store.get(&t.z_ref).ok_or(ChainError::MissingBlob(t.z_ref))?;
                let f_bytes = store.get(&t.f_ref).ok_or(ChainError::MissingBlob(t.f_ref))?;
                let f = DelModel::<f64>::from_bytes(&f_bytes)?;
                if f.m() != p.definition.m || f.num_classes() != p.definition.num_classes {
                    return Err(ChainError::Commit(format!(
                        "DEL function {} is for m={}, C={}, problem has m={}, C={}",
                        t.f_ref,
                        f.m(),
                        f.num_classes(),
                        p.definition.m,
                        p.definition.num_classes
                    )));
                }
                if t.y_t.dim() != f.n() {
                    return Err(ChainError::Commit(format!(
                        "y_t has dimension {}, DEL function outputs {}",
                        t.y_t.dim(),
                        f.n()
                    )));
                }
                drop(z);
            }
        }
        self.y_t = Some(first.y_t.clone());
        Ok(())
    }

    fn apply_improvement(&mut self, b: &ImprovementBlock) -> Result<(), ChainError> {
        let y_t = self
            .y_t
            .as_ref()
            .ok_or_else(|| ChainError::Commit("improvement block before the problem block".into()))?;
        if b.verifications.is_empty() {
            return Err(ChainError::Commit("improvement block without verification proofs".into()));
        }
        b.winner.check_signature()?;
        let mut voters = BTreeSet::new();
        for v in &b.verifications {
            if v.inner != b.winner {
                return Err(ChainError::Commit("verification proof endorses a different proof".into()));
            }
            if !voters.insert(v.verifier_address()) {
                return Err(ChainError::Commit(format!(
                    "verifier {} appears twice",
                    v.verifier_address()
                )));
            }
            if v.d_c != self.best || v.delta != self.params.delta {
                return Err(ChainError::Commit(format!(
                    "verification states d_c={}, delta={}; chain has {}, {}",
                    v.d_c, v.delta, self.best, self.params.delta
                )));
            }
            v.check_signatures()?;
        }
        let d = distance(&b.winner.y, y_t)?;
        if d.to_bits() != b.distance.to_bits() {
            return Err(ChainError::Commit(format!(
                "recorded distance {} but the proof gives {d}",
                b.distance
            )));
        }
        if !(d < self.best - self.params.delta) {
            return Err(ChainError::InsufficientImprovement {
                distance: d,
                best: self.best,
                delta: self.params.delta,
            });
        }

        let r = reward(d, self.best, self.params.a)?;
        let mut credits = vec![(b.winner.prover_address(), TokenAmount::from_real(r)?)];
        for (i, v) in b.verifications.iter().enumerate() {
            let share = validator_reward(r, (i + 1) as u32)?;
            credits.push((v.verifier_address(), TokenAmount::from_real(share)?));
        }
        for (who, amount) in credits {
            *self.balances.entry(who).or_default() += amount;
            self.credits.push((b.number, who, amount));
        }
        self.best = d;
        Ok(())
    }
}

/// Rebuilds a ledger from `blocks`, re-deriving every hash, link, signature,
/// distance and reward. The first failing block is named in the error.
pub fn verify_chain(blocks: &[Block], store: Option<&BlobStore>) -> Result<Ledger, ChainError> {
    let genesis = match blocks.first() {
        Some(Block::Problem(p)) => p,
        Some(other) => {
            return Err(ChainError::Integrity {
                block: other.number(),
                reason: "chain does not start with a problem block".into(),
            });
        }
        None => {
            return Err(ChainError::Integrity {
                block: 0,
                reason: "chain is empty".into(),
            });
        }
    };
    let mut ledger = Ledger::new(genesis.consensus).map_err(|e| ChainError::Integrity {
        block: 0,
        reason: e.to_string(),
    })?;
    for (i, block) in blocks.iter().enumerate() {
        ledger
            .apply(block.clone(), store)
            .map_err(|e| ChainError::Integrity {
                block: i as u64,
                reason: e.to_string(),
            })?;
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{blocks_from_jsonl, blocks_to_jsonl};
    use crate::del::{InputEncoding, LabelVector};
    use crate::poi::{ModelArtifact, PeerIdentity, keygen, prove, verify};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct World {
        store: BlobStore,
        f: DelModel<f64>,
        x_t: LabelVector,
        tuple: TestTuple,
        peers: Vec<PeerIdentity>,
    }

    fn world() -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x_t = LabelVector::random(50, 4, &mut rng).unwrap();
        let f = DelModel::untrained(50, 5, 4, 10, InputEncoding::CenteredScaled, 1).unwrap();
        let store = BlobStore::new();
        let tuple = TestTuple {
            z_ref: store.put(b"test inputs"),
            f_ref: store.put(&f.to_bytes()),
            y_t: f.embed(&x_t).unwrap(),
        };
        let peers = (0..5).map(|_| keygen(&mut rng)).collect();
        World {
            store,
            f,
            x_t,
            tuple,
            peers,
        }
    }

    fn definition() -> ProblemDefinition {
        ProblemDefinition {
            id: "toy".into(),
            input_spec: "50 synthetic inputs".into(),
            num_classes: 4,
            m: 50,
        }
    }

    fn genesis(w: &World, params: ConsensusParams) -> Ledger {
        let mut ledger = Ledger::new(params).unwrap();
        let pending = [PendingTuple {
            tick: 0,
            tuple: w.tuple.clone(),
        }];
        ledger.commit_problem_block(&pending, definition(), &w.store).unwrap();
        ledger
    }

    /// A model with `flips` positions changed, proved by `peers[prover]`
    /// and endorsed by `peers[v]` for each listed `v`.
    fn submission(w: &World, ledger: &Ledger, flips: usize, prover: usize, voters: &[usize]) -> Submission {
        let mut x = w.x_t.clone();
        for i in 0..flips {
            let l = x.labels()[i] % 4 + 1;
            x = x.with_label(i, l).unwrap();
        }
        let model = ModelArtifact::new(x, format!("{flips} flips"));
        let proof = prove(&model, &w.f, &w.peers[prover]).unwrap();
        let votes = voters
            .iter()
            .map(|&v| {
                verify(
                    &model,
                    &proof,
                    &w.f,
                    &w.tuple.y_t,
                    ledger.best_distance(),
                    ledger.params().delta,
                    &w.peers[v],
                )
                .unwrap()
            })
            .collect();
        Submission {
            proof,
            first_tick: 10,
            votes,
        }
    }

    #[test]
    fn genesis_block_shape() {
        let w = world();
        let ledger = genesis(&w, ConsensusParams::default());
        let p = ledger.problem_block().unwrap();
        assert_eq!(p.number, 0);
        assert_eq!(p.parent, Digest::ZERO);
        assert_eq!(p.hash, p.compute_hash());
    }

    #[test]
    fn genesis_requires_tuples_and_blobs() {
        let w = world();
        let mut ledger = Ledger::new(ConsensusParams::default()).unwrap();
        assert!(matches!(
            ledger.commit_problem_block(&[], definition(), &w.store),
            Err(ChainError::Commit(_))
        ));
        let mut bad = w.tuple.clone();
        bad.z_ref = crate::poi::digest(b"nowhere");
        let pending = [PendingTuple { tick: 0, tuple: bad }];
        assert!(matches!(
            ledger.commit_problem_block(&pending, definition(), &w.store),
            Err(ChainError::MissingBlob(_))
        ));
    }

    #[test]
    fn tuples_ordered_by_tick_then_digest() {
        let w = world();
        let mut other = w.tuple.clone();
        other.z_ref = w.store.put(b"second inputs");
        let mut third = w.tuple.clone();
        third.z_ref = w.store.put(b"third inputs");
        let pending = vec![
            PendingTuple { tick: 2, tuple: other.clone() },
            PendingTuple { tick: 1, tuple: third.clone() },
            PendingTuple { tick: 1, tuple: w.tuple.clone() },
        ];
        let mut ledger = Ledger::new(ConsensusParams::default()).unwrap();
        let block = ledger.commit_problem_block(&pending, definition(), &w.store).unwrap();
        let mut same_tick = [w.tuple.clone(), third.clone()];
        same_tick.sort_by_key(TestTuple::digest);
        assert_eq!(block.tuples, vec![same_tick[0].clone(), same_tick[1].clone(), other]);
    }

    #[test]
    fn tally_counts_unique_addresses() {
        let w = world();
        let ledger = genesis(&w, ConsensusParams::default());
        let a = submission(&w, &ledger, 3, 0, &[1, 2, 3]);
        let b = submission(&w, &ledger, 5, 4, &[1, 2]);
        assert_eq!(tally(&[b.clone(), a.clone()]), Some(1));

        let dup = submission(&w, &ledger, 3, 0, &[1, 1, 2]);
        assert_eq!(unique_voters(&dup).len(), 2);

        let mut early = submission(&w, &ledger, 5, 4, &[1, 2]);
        early.first_tick = 3;
        let mut late = submission(&w, &ledger, 3, 0, &[1, 2]);
        late.first_tick = 5;
        assert_eq!(tally(&[late.clone(), early.clone()]), Some(1));

        late.first_tick = 3;
        let expect = if late.proof.g < early.proof.g { 0 } else { 1 };
        assert_eq!(tally(&[late, early]), Some(expect));
        assert_eq!(tally(&[]), None);
    }

    #[test]
    fn improvement_pays_improver_and_validators() {
        let w = world();
        let mut ledger = genesis(&w, ConsensusParams::default());
        let sub = submission(&w, &ledger, 4, 0, &[1, 2, 3]);
        let block = ledger.commit_improvement_block(&sub).unwrap().clone();
        assert_eq!(block.number, 1);
        let d = block.distance;
        let r = reward(d, 1.0, 3.0).unwrap();
        assert_eq!(ledger.best_distance(), d);
        assert_eq!(ledger.balance(&w.peers[0].address()), TokenAmount::from_real(r).unwrap());
        for (s, v) in [1usize, 2, 3].iter().enumerate() {
            let expect = TokenAmount::from_real(r * 0.5f64.powi(s as i32 + 1)).unwrap();
            assert_eq!(ledger.balance(&w.peers[*v].address()), expect);
        }
    }

    #[test]
    fn duplicate_voter_is_dropped_from_payout() {
        let w = world();
        let mut ledger = genesis(&w, ConsensusParams::default());
        let sub = submission(&w, &ledger, 4, 0, &[1, 2, 1]);
        let block = ledger.commit_improvement_block(&sub).unwrap();
        assert_eq!(block.verifications.len(), 1);
        assert_eq!(block.verifications[0].verifier_address(), w.peers[2].address());
        assert_eq!(ledger.balance(&w.peers[1].address()), TokenAmount::ZERO);
    }

    #[test]
    fn stale_winner_rejected() {
        let w = world();
        let mut ledger = genesis(&w, ConsensusParams::default());
        let first = submission(&w, &ledger, 2, 0, &[1]);
        let stale = submission(&w, &ledger, 2, 4, &[2]);
        ledger.commit_improvement_block(&first).unwrap();
        assert!(matches!(
            ledger.commit_improvement_block(&stale),
            Err(ChainError::InsufficientImprovement { .. })
        ));
        assert_eq!(ledger.blocks().len(), 2);
    }

    #[test]
    fn replay_and_tamper_detection() {
        let w = world();
        let mut ledger = genesis(&w, ConsensusParams { delta: 0.0, ..Default::default() });
        for flips in [45, 40, 30, 20, 15, 10, 6, 4, 2, 1] {
            let sub = submission(&w, &ledger, flips, 0, &[]);
            if distance(&sub.proof.y, &w.tuple.y_t).unwrap() < ledger.best_distance() {
                let sub = submission(&w, &ledger, flips, 0, &[1, 2]);
                ledger.commit_improvement_block(&sub).unwrap();
            }
        }
        assert!(ledger.blocks().len() >= 3);
        let text = blocks_to_jsonl(ledger.blocks());
        let replayed = verify_chain(&blocks_from_jsonl(&text).unwrap(), Some(&w.store)).unwrap();
        assert_eq!(replayed.blocks(), ledger.blocks());
        assert_eq!(replayed.balances(), ledger.balances());
        assert_eq!(blocks_to_jsonl(replayed.blocks()), text);

        let mut blocks = ledger.blocks().to_vec();
        if let Block::Improvement(b) = &mut blocks[2] {
            b.distance = f64::from_bits(b.distance.to_bits() ^ 1);
        }
        match verify_chain(&blocks, None) {
            Err(ChainError::Integrity { block, .. }) => assert_eq!(block, 2),
            other => panic!("expected integrity failure, got {other:?}"),
        }
    }

    #[test]
    fn digest_first_rule() {
        let w = world();
        let mut reg = DigestRegistry::new();
        let g = crate::poi::digest(b"model");
        let owner = w.peers[0].address();
        reg.register(g, 4, owner).unwrap();
        assert!(reg.check_release(&g, 4, owner).is_err());
        assert!(reg.check_release(&g, 5, owner).is_ok());
        assert!(reg.check_release(&g, 5, w.peers[1].address()).is_err());
        assert!(reg.register(g, 6, w.peers[1].address()).is_err());
        assert!(reg.check_release(&crate::poi::digest(b"x"), 9, owner).is_err());
    }
}
