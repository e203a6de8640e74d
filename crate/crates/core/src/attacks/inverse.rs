use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::del::{DelModel, EmbeddingVector, LabelVector, generate_data, label_error};
use crate::numerics::{AdamConfig, AdamState, MlpParams};
use crate::scalar::Scalar;

/// Where the attacker's training pairs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseMode {
    /// Perturbations of `x_t`: the attacker knows the target neighbourhood.
    Nearby,
    /// Uniform label vectors: no knowledge of `x_t`.
    Random,
}

impl InverseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InverseMode::Nearby => "nearby",
            InverseMode::Random => "random",
        }
    }
}

impl std::str::FromStr for InverseMode {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearby" => Ok(InverseMode::Nearby),
            "random" => Ok(InverseMode::Random),
            other => Err(AttackError::InvalidConfig(format!(
                "unknown mode {other:?} (expected nearby or random)"
            ))),
        }
    }
}

/// `(f(x), x)` with `x` a perturbation of `x_t`.
pub fn generate_inverse_nearby<T: Scalar, R: Rng + ?Sized>(
    x_t: &LabelVector,
    f: &DelModel<T>,
    rng: &mut R,
) -> Result<(EmbeddingVector<T>, LabelVector), AttackError> {
    let x = generate_data(x_t, rng);
    Ok((f.embed(&x)?, x))
}

/// `(f(x), x)` with `x` uniform over `{1..C}^m`. Takes no target vector.
pub fn generate_inverse_random<T: Scalar, R: Rng + ?Sized>(
    f: &DelModel<T>,
    num_classes: u16,
    rng: &mut R,
) -> Result<(EmbeddingVector<T>, LabelVector), AttackError> {
    let x = LabelVector::random(f.m(), num_classes, rng)?;
    Ok((f.embed(&x)?, x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseAttackConfig {
    pub mode: InverseMode,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub samples_per_epoch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for InverseAttackConfig {
    fn default() -> Self {
        Self {
            mode: InverseMode::Nearby,
            hidden: 256,
            epochs: 150,
            batch_size: 64,
            samples_per_epoch: 512,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl InverseAttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let positive = [
            ("hidden", self.hidden),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("samples_per_epoch", self.samples_per_epoch),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(AttackError::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AttackError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Recovery error `e(f⁻¹(y_t), x_t)` after each epoch; entry 0 is the
/// untrained attacker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseAttackTrace {
    pub mode: InverseMode,
    pub errors: Vec<f64>,
}

impl InverseAttackTrace {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("trace holds epoch 0")
    }

    /// `epoch,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,error\n");
        for (i, e) in self.errors.iter().enumerate() {
            out.push_str(&format!("{i},{e}\n"));
        }
        out
    }

    /// `epoch,mode,error`, suitable for concatenating several modes.
    pub fn to_mode_csv(traces: &[InverseAttackTrace]) -> String {
        let mut out = String::from("epoch,mode,error\n");
        for t in traces {
            for (i, e) in t.errors.iter().enumerate() {
                out.push_str(&format!("{i},{},{e}\n", t.mode.as_str()));
            }
        }
        out
    }
}

fn recovery_error<T: Scalar>(
    attacker: &MlpParams<T>,
    y_t: &EmbeddingVector<T>,
    x_t: &LabelVector,
) -> Result<f64, AttackError> {
    let out = attacker.forward_linear(y_t.values())?;
    let guess = LabelVector::decode(&out, x_t.num_classes())?;
    Ok(label_error(&guess, x_t)?)
}

/// Trains an MLP `n → hidden → m` to invert `f` under squared error against
/// the encoded labels, scoring `f⁻¹(y_t)` against `x_t` after every epoch.
///
/// `x_t` feeds the generator only in [`InverseMode::Nearby`].
pub fn train_inverse_attack<T: Scalar>(
    f: &DelModel<T>,
    y_t: &EmbeddingVector<T>,
    cfg: &InverseAttackConfig,
    x_t: &LabelVector,
) -> Result<InverseAttackTrace, AttackError> {
    cfg.validate()?;
    f.check_labels(x_t)?;
    if y_t.dim() != f.n() {
        return Err(AttackError::InvalidConfig(format!(
            "target embedding has dimension {}, model outputs {}",
            y_t.dim(),
            f.n()
        )));
    }
    let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
    init.set_stream(0);
    let mut data = ChaCha8Rng::seed_from_u64(cfg.seed);
    data.set_stream(1);

    let mut attacker = MlpParams::<T>::init_uniform(f.n(), cfg.hidden, f.m(), &mut init);
    let mut adam = AdamState::for_params(&attacker, AdamConfig::with_learning_rate(T::lit(cfg.learning_rate)));
    let mut grads = attacker.zeros_like();
    let mut errors = vec![recovery_error(&attacker, y_t, x_t)?];

    for epoch in 0..cfg.epochs {
        let mut pairs = Vec::with_capacity(cfg.samples_per_epoch);
        for _ in 0..cfg.samples_per_epoch {
            let (y, x) = match cfg.mode {
                InverseMode::Nearby => generate_inverse_nearby(x_t, f, &mut data)?,
                InverseMode::Random => generate_inverse_random(f, f.num_classes(), &mut data)?,
            };
            pairs.push((y, x.encode::<T>()));
        }
        for batch in pairs.chunks(cfg.batch_size) {
            grads.as_mut_slice().iter_mut().for_each(|g| *g = T::zero());
            let scale = T::lit(2.0) / T::lit(batch.len() as f64);
            for (y, target) in batch {
                let cache = attacker.forward_linear_cached(y.values())?;
                let grad_out: Vec<T> = cache.output.iter().zip(target).map(|(&o, &t)| scale * (o - t)).collect();
                attacker.backward(y.values(), &cache, &grad_out, &mut grads)?;
            }
            adam.update_params(&mut attacker, &grads).map_err(|e| AttackError::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
        }
        errors.push(recovery_error(&attacker, y_t, x_t)?);
    }
    Ok(InverseAttackTrace { mode: cfg.mode, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::del::{DelTrainConfig, InputEncoding, train_del};

    fn setup() -> (DelModel<f64>, LabelVector) {
        let x_t = LabelVector::random(60, 4, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let f = DelModel::untrained(60, 6, 4, 16, InputEncoding::CenteredScaled, 2).unwrap();
        (f, x_t)
    }

    #[test]
    fn generated_pairs_are_consistent() {
        let (f, x_t) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, x) = generate_inverse_nearby(&x_t, &f, &mut rng).unwrap();
        assert_eq!(y, f.embed(&x).unwrap());
        let (y, x) = generate_inverse_random(&f, 4, &mut rng).unwrap();
        assert_eq!(y, f.embed(&x).unwrap());
        let again = generate_inverse_random(&f, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(again, generate_inverse_random(&f, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap());
    }

    #[test]
    fn random_pairs_have_binomial_error() {
        let x_t = LabelVector::random(200, 10, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let f = DelModel::<f64>::untrained(200, 4, 10, 8, InputEncoding::CenteredScaled, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 1000;
        let mean = (0..draws)
            .map(|_| label_error(&generate_inverse_random(&f, 10, &mut rng).unwrap().1, &x_t).unwrap())
            .sum::<f64>()
            / draws as f64;
        let sigma = (0.9 * 0.1 / (200.0 * draws as f64)).sqrt();
        assert!((mean - 0.9).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("nearby".parse::<InverseMode>().unwrap(), InverseMode::Nearby);
        assert_eq!("random".parse::<InverseMode>().unwrap(), InverseMode::Random);
        assert!("sideways".parse::<InverseMode>().is_err());
    }

    #[test]
    fn nearby_attack_recovers_small_target() {
        let x_t = LabelVector::random(60, 4, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let del_cfg = DelTrainConfig {
            hidden: 32,
            epochs: 20,
            samples_per_epoch: 128,
            test_samples: 32,
            ..Default::default()
        };
        let (f, _) = train_del::<f64>(&x_t, 6, &del_cfg).unwrap();
        let y_t = f.embed(&x_t).unwrap();
        let cfg = InverseAttackConfig {
            hidden: 64,
            epochs: 40,
            samples_per_epoch: 128,
            ..Default::default()
        };
        let trace = train_inverse_attack(&f, &y_t, &cfg, &x_t).unwrap();
        assert_eq!(trace.errors.len(), 41);
        assert!(trace.final_error() < trace.errors[0]);
        assert!(trace.to_csv().starts_with("epoch,error\n0,"));
        let both = InverseAttackTrace::to_mode_csv(std::slice::from_ref(&trace));
        assert!(both.lines().nth(1).unwrap().contains(",nearby,"));
    }

    #[test]
    fn config_validation() {
        let (f, x_t) = setup();
        let y_t = f.embed(&x_t).unwrap();
        let cfg = InverseAttackConfig { epochs: 0, ..Default::default() };
        assert!(matches!(
            train_inverse_attack(&f, &y_t, &cfg, &x_t),
            Err(AttackError::InvalidConfig(_))
        ));
    }
}
