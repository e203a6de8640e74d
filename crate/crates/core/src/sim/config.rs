use serde::{Deserialize, Serialize};

use super::SimError;
use crate::chain::ConsensusParams;
use crate::del::{DelTrainConfig, InputEncoding};

/// Shape of the test set and of the DEL function the contributor trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelSetup {
    pub m: usize,
    pub n: usize,
    pub num_classes: u16,
    pub train: DelTrainConfig,
}

impl Default for DelSetup {
    fn default() -> Self {
        Self {
            m: 1000,
            n: 64,
            num_classes: 10,
            train: DelTrainConfig {
                encoding: InputEncoding::OneHot,
                epochs: 60,
                ..DelTrainConfig::default()
            },
        }
    }
}

impl DelSetup {
    pub fn validate(&self) -> Result<(), SimError> {
        self.train.validate()?;
        if self.n == 0 || self.n >= self.m {
            return Err(SimError::Config(format!(
                "DEL dimension n={} must satisfy 0 < n < m={}",
                self.n, self.m
            )));
        }
        if self.num_classes < 2 {
            return Err(SimError::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        Ok(())
    }
}

/// Which adversarial peers take part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryToggles {
    /// Submits a strong model under a corrupted signature every period.
    pub bad_signature: bool,
    /// Resubmits a relabelled copy of the current best model.
    pub non_improver: bool,
    /// An extra validator that sends every vote twice.
    pub duplicate_voter: bool,
}

impl Default for AdversaryToggles {
    fn default() -> Self {
        Self {
            bad_signature: true,
            non_improver: true,
            duplicate_voter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub consensus: ConsensusParams,
    pub contributors: usize,
    pub validators: usize,
    /// One error schedule per honest improver: the true error rates of the
    /// models it obtains, one new model per competition period.
    pub improvers: Vec<Vec<f64>>,
    pub del: DelSetup,
    /// Number of competition periods after the problem-definition period.
    pub periods: usize,
    pub adversaries: AdversaryToggles,
    /// Votes reach the committer 1..=max_vote_latency ticks after the proof.
    pub max_vote_latency: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            consensus: ConsensusParams::default(),
            contributors: 1,
            validators: 4,
            improvers: vec![vec![0.40, 0.25, 0.12], vec![0.30, 0.18, 0.06], vec![0.45, 0.20, 0.03]],
            del: DelSetup::default(),
            periods: 8,
            adversaries: AdversaryToggles::default(),
            max_vote_latency: 3,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        self.consensus.validate()?;
        self.del.validate()?;
        if self.contributors == 0 {
            return bad("at least one contributor must publish the test tuple".into());
        }
        if self.max_vote_latency == 0 {
            return bad("max_vote_latency must be at least 1".into());
        }
        if self.consensus.t_b < 3 {
            return bad(format!(
                "T_b={} leaves no room to register, release and vote (need at least 3 ticks)",
                self.consensus.t_b
            ));
        }
        for (i, schedule) in self.improvers.iter().enumerate() {
            if let Some(e) = schedule.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                return bad(format!("improver {i} has error rate {e} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"seed": 3, "validators": 2}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.validators, 2);
        assert_eq!(cfg.periods, ScenarioConfig::default().periods);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let mut cfg = ScenarioConfig::default();
        cfg.improvers[1][0] = 1.5;
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            contributors: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.del.n = cfg.del.m;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.consensus.t_b = 2;
        assert!(cfg.validate().is_err());
    }
}
