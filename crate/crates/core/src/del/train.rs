use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::distance_from_dot;
use super::model::init_rng;
use super::{DelError, DelModel, EncodedInput, InputEncoding, LabelVector, distance, generate_data, label_error};
use crate::numerics::{AdamConfig, AdamState, MlpParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelTrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub samples_per_epoch: usize,
    pub learning_rate: f64,
    /// Learning rate at the last epoch as a fraction of `learning_rate`;
    /// the schedule in between is a half cosine. `1.0` keeps it constant.
    pub min_lr_fraction: f64,
    pub encoding: InputEncoding,
    /// Size of the held-out set scored after every epoch.
    pub test_samples: usize,
    pub seed: u64,
}

impl Default for DelTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            epochs: 200,
            batch_size: 64,
            samples_per_epoch: 512,
            learning_rate: 1e-3,
            min_lr_fraction: 0.1,
            encoding: InputEncoding::CenteredScaled,
            test_samples: 256,
            seed: 0,
        }
    }
}

impl DelTrainConfig {
    pub fn validate(&self) -> Result<(), DelError> {
        let bad = |what: &str| Err(DelError::InvalidConfig(format!("{what} must be positive")));
        if self.hidden == 0 {
            return bad("hidden");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.samples_per_epoch == 0 {
            return bad("samples_per_epoch");
        }
        if self.test_samples == 0 {
            return bad("test_samples");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if !(self.min_lr_fraction > 0.0 && self.min_lr_fraction <= 1.0) {
            return Err(DelError::InvalidConfig("min_lr_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let progress = epoch as f64 / self.epochs as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.learning_rate * (self.min_lr_fraction + (1.0 - self.min_lr_fraction) * cosine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochLoss>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,test_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.test_loss));
        }
        out
    }
}

/// Stream layout for one training seed: 0 initialization, 1 training
/// data, 2 held-out data.
fn data_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Sample<T> {
    input: EncodedInput<T>,
    error: T,
}

fn make_sample<T: Scalar>(encoding: InputEncoding, x: &LabelVector, x_t: &LabelVector) -> Sample<T> {
    Sample {
        input: encoding.encode(x),
        error: T::lit(label_error(x, x_t).expect("compatible shapes")),
    }
}

/// Mean `|e − d|` over `samples` for the current parameters.
fn mean_loss<T: Scalar>(
    params: &MlpParams<T>,
    target_input: &EncodedInput<T>,
    samples: &[Sample<T>],
) -> Result<f64, DelError> {
    let y_t = params.forward_train(target_input.as_input())?.output;
    let mut total = 0.0;
    for s in samples {
        let y = params.forward_train(s.input.as_input())?.output;
        let dot: T = y.iter().zip(&y_t).map(|(&a, &b)| a * b).sum();
        total += (s.error - distance_from_dot(dot)).abs().to_f64_lossy();
    }
    Ok(total / samples.len() as f64)
}

/// Learns an `x_t`-specific DEL function by minimizing
/// `|e(x, x_t) − d(f(x), f(x_t))|` over perturbations of `x_t`.
///
/// Every epoch holds `samples_per_epoch` samples: `x_t` itself once, the
/// rest fresh perturbations. The held-out set comes from a disjoint random stream.
pub fn train_del<T: Scalar>(
    x_t: &LabelVector,
    n: usize,
    cfg: &DelTrainConfig,
) -> Result<(DelModel<T>, TrainTrace), DelError> {
    cfg.validate()?;
    let m = x_t.len();
    if n == 0 || n >= m {
        return Err(DelError::InvalidConfig(format!(
            "embedding dimension n={n} must satisfy 0 < n < m={m}"
        )));
    }
    let encoding = cfg.encoding;
    let input_dim = encoding.input_dim(m, x_t.num_classes());
    let mut params = MlpParams::<T>::init_uniform(input_dim, cfg.hidden, n, &mut init_rng(cfg.seed));
    let mut adam = AdamState::for_params(&params, AdamConfig::with_learning_rate(T::lit(cfg.learning_rate)));
    let mut rng = data_rng(cfg.seed, 1);
    let mut held_rng = data_rng(cfg.seed, 2);
    let held_out: Vec<Sample<T>> = (0..cfg.test_samples)
        .map(|_| make_sample(encoding, &generate_data(x_t, &mut held_rng), x_t))
        .collect();

    let target_input = encoding.encode::<T>(x_t);
    let mut grads = params.zeros_like();
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        adam.config.learning_rate = T::lit(cfg.learning_rate_at(epoch));
        let mut epoch_samples = Vec::with_capacity(cfg.samples_per_epoch);
        epoch_samples.push(make_sample(encoding, x_t, x_t));
        for _ in 1..cfg.samples_per_epoch {
            epoch_samples.push(make_sample(encoding, &generate_data(x_t, &mut rng), x_t));
        }

        let mut epoch_loss = 0.0;
        for batch in epoch_samples.chunks(cfg.batch_size) {
            grads.as_mut_slice().iter_mut().for_each(|g| *g = T::zero());
            let target = params.forward_train(target_input.as_input())?;
            let mut grad_target = vec![T::zero(); n];
            let scale = T::one() / T::lit(batch.len() as f64);
            for s in batch {
                let cache = params.forward_train(s.input.as_input())?;
                let dot: T = cache.output.iter().zip(&target.output).map(|(&a, &b)| a * b).sum();
                let d = distance_from_dot(dot);
                let diff = d - s.error;
                epoch_loss += diff.abs().to_f64_lossy();
                if dot < T::zero() || diff == T::zero() {
                    continue;
                }
                // ∂|d − e|/∂d = sign(d − e); ∂d/∂y = −y_t, ∂d/∂y_t = −y
                let w = diff.signum() * scale;
                let grad_y: Vec<T> = target.output.iter().map(|&v| -w * v).collect();
                for (gt, &v) in grad_target.iter_mut().zip(&cache.output) {
                    *gt -= w * v;
                }
                params.backward(s.input.as_input(), &cache, &grad_y, &mut grads)?;
            }
            params.backward(target_input.as_input(), &target, &grad_target, &mut grads)?;
            adam.update_params(&mut params, &grads).map_err(|e| DelError::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
        }

        let train_loss = epoch_loss / epoch_samples.len() as f64;
        let test_loss = mean_loss(&params, &target_input, &held_out)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(DelError::Diverged {
                epoch,
                detail: format!("loss became non-finite (train {train_loss}, test {test_loss})"),
            });
        }
        trace.epochs.push(EpochLoss {
            epoch: epoch + 1,
            train_loss,
            test_loss,
        });
    }

    let model = DelModel::new(params, m, x_t.num_classes(), encoding, cfg.seed)?;
    Ok((model, trace))
}

/// Agreement between label error and embedding distance on a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub mean_abs_deviation: f64,
    pub max_abs_deviation: f64,
    /// `(error, distance)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

impl CorrelationReport {
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let n = pairs.len() as f64;
        let (mut mad, mut max) = (0.0_f64, 0.0_f64);
        for &(e, d) in &pairs {
            mad += (e - d).abs();
            max = max.max((e - d).abs());
        }
        Self {
            pearson_r: pearson(&pairs),
            mean_abs_deviation: if pairs.is_empty() { f64::NAN } else { mad / n },
            max_abs_deviation: max,
            pairs,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("error,distance\n");
        for (e, d) in &self.pairs {
            out.push_str(&format!("{e},{d}\n"));
        }
        out
    }
}

/// Sample Pearson correlation; NaN when either coordinate has zero variance.
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Scores `model` on `num_samples` fresh perturbations of `x_t`.
pub fn eval_del<T: Scalar, R: Rng + ?Sized>(
    model: &DelModel<T>,
    x_t: &LabelVector,
    num_samples: usize,
    rng: &mut R,
) -> Result<CorrelationReport, DelError> {
    let y_t = model.embed(x_t)?;
    let mut pairs = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let x = generate_data(x_t, rng);
        let d = distance(&model.embed(&x)?, &y_t)?;
        pairs.push((label_error(&x, x_t)?, d.to_f64_lossy()));
    }
    Ok(CorrelationReport::from_pairs(pairs))
}
