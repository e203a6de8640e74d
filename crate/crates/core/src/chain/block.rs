use serde::{Deserialize, Serialize};

use super::types::{ConsensusParams, ProblemDefinition, TestTuple};
use super::ChainError;
use crate::poi::wire::FieldWriter;
use crate::poi::{Digest, PoiProof, VerificationProof, digest};

const PROBLEM_TAG: &[u8] = b"daimon/block/problem/v1";
const IMPROVEMENT_TAG: &[u8] = b"daimon/block/improvement/v1";

/// Genesis block: the problem, the consensus parameters it runs under, and
/// every test tuple published during the problem-definition period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemBlock {
    pub number: u64,
    pub parent: Digest,
    pub consensus: ConsensusParams,
    pub definition: ProblemDefinition,
    pub tuples: Vec<TestTuple>,
    pub hash: Digest,
}

/// One accepted improvement: the winning proof, its endorsements in arrival
/// order (position `s` is index + 1), and the achieved distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementBlock {
    pub number: u64,
    pub parent: Digest,
    pub winner: PoiProof,
    pub verifications: Vec<VerificationProof>,
    #[serde(with = "crate::serde_dec")]
    pub distance: f64,
    pub hash: Digest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Block {
    Problem(ProblemBlock),
    Improvement(ImprovementBlock),
}

impl ProblemBlock {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new()
            .field(PROBLEM_TAG)
            .u64_field(self.number)
            .field(&self.parent.0);
        w = self.consensus.write(w);
        w = self.definition.write(w);
        w = w.u64_field(self.tuples.len() as u64);
        for t in &self.tuples {
            w = t.write(w);
        }
        w.finish()
    }

    pub fn compute_hash(&self) -> Digest {
        digest(&self.canonical_bytes())
    }
}

impl ImprovementBlock {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new()
            .field(IMPROVEMENT_TAG)
            .u64_field(self.number)
            .field(&self.parent.0)
            .field(&self.winner.to_wire())
            .u64_field(self.verifications.len() as u64);
        for v in &self.verifications {
            w = w.field(&v.to_wire());
        }
        w.f64_field(self.distance).finish()
    }

    pub fn compute_hash(&self) -> Digest {
        digest(&self.canonical_bytes())
    }
}

impl Block {
    pub fn number(&self) -> u64 {
        match self {
            Block::Problem(b) => b.number,
            Block::Improvement(b) => b.number,
        }
    }

    pub fn parent(&self) -> Digest {
        match self {
            Block::Problem(b) => b.parent,
            Block::Improvement(b) => b.parent,
        }
    }

    pub fn hash(&self) -> Digest {
        match self {
            Block::Problem(b) => b.hash,
            Block::Improvement(b) => b.hash,
        }
    }

    /// Canonical binary encoding of every field except the stored hash.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            Block::Problem(b) => b.canonical_bytes(),
            Block::Improvement(b) => b.canonical_bytes(),
        }
    }

    pub fn compute_hash(&self) -> Digest {
        digest(&self.canonical_bytes())
    }
}

/// One compact JSON document per block, newline-terminated.
pub fn blocks_to_jsonl(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&serde_json::to_string(b).expect("block serializes"));
        out.push('\n');
    }
    out
}

pub fn blocks_from_jsonl(text: &str) -> Result<Vec<Block>, ChainError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ChainError::Format {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}
