use rand::Rng;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::DelError;
use crate::scalar::Scalar;

/// A vector of `m` class labels, each in `1..=C`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLabels", into = "RawLabels")]
pub struct LabelVector {
    labels: Vec<u16>,
    num_classes: u16,
}

#[derive(Serialize, Deserialize)]
struct RawLabels {
    num_classes: u16,
    labels: Vec<u16>,
}

impl TryFrom<RawLabels> for LabelVector {
    type Error = DelError;
    fn try_from(raw: RawLabels) -> Result<Self, Self::Error> {
        LabelVector::new(raw.labels, raw.num_classes)
    }
}

impl From<LabelVector> for RawLabels {
    fn from(v: LabelVector) -> Self {
        RawLabels {
            num_classes: v.num_classes,
            labels: v.labels,
        }
    }
}

impl LabelVector {
    pub fn new(labels: Vec<u16>, num_classes: u16) -> Result<Self, DelError> {
        if num_classes < 2 {
            return Err(DelError::InvalidLabels(format!("need at least 2 classes, got {num_classes}")));
        }
        if labels.is_empty() {
            return Err(DelError::InvalidLabels("label vector is empty".into()));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|&(_, &c)| c < 1 || c > num_classes) {
            return Err(DelError::InvalidLabels(format!(
                "label {c} at position {i} outside 1..={num_classes}"
            )));
        }
        Ok(Self { labels, num_classes })
    }

    /// Labels drawn independently and uniformly from `1..=C`.
    pub fn random<R: Rng + ?Sized>(m: usize, num_classes: u16, rng: &mut R) -> Result<Self, DelError> {
        let labels = (0..m).map(|_| rng.random_range(1..=num_classes)).collect();
        Self::new(labels, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    fn check_compatible(&self, other: &LabelVector) -> Result<(), DelError> {
        if self.len() != other.len() {
            return Err(DelError::LengthMismatch {
                expected: other.len(),
                actual: self.len(),
            });
        }
        if self.num_classes != other.num_classes {
            return Err(DelError::ClassMismatch {
                expected: other.num_classes,
                actual: self.num_classes,
            });
        }
        Ok(())
    }

    /// Number of positions where `self` and `other` disagree.
    pub fn mismatches(&self, other: &LabelVector) -> Result<usize, DelError> {
        self.check_compatible(other)?;
        Ok(self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count())
    }

    /// Replaces the label at `index`; the new label must be in range.
    pub fn with_label(mut self, index: usize, label: u16) -> Result<Self, DelError> {
        if label < 1 || label > self.num_classes {
            return Err(DelError::InvalidLabels(format!("label {label} outside 1..={}", self.num_classes)));
        }
        let len = self.labels.len();
        *self
            .labels
            .get_mut(index)
            .ok_or(DelError::InvalidLabels(format!("index {index} out of range for length {len}")))? = label;
        Ok(self)
    }

    /// Network input: each label `c` becomes `(c − (C+1)/2) / C`.
    pub fn encode<T: Scalar>(&self) -> Vec<T> {
        let c = self.num_classes as f64;
        let center = (c + 1.0) / 2.0;
        self.labels.iter().map(|&l| T::lit((l as f64 - center) / c)).collect()
    }

    /// Inverse of [`encode`](Self::encode) followed by rounding to the
    /// nearest class, clamped to `1..=C`.
    pub fn decode<T: Scalar>(values: &[T], num_classes: u16) -> Result<Self, DelError> {
        let c = num_classes as f64;
        let center = (c + 1.0) / 2.0;
        let labels = values
            .iter()
            .map(|v| {
                let raw = v.to_f64_lossy() * c + center;
                let r = if raw.is_finite() { raw.round() } else { center.round() };
                r.clamp(1.0, c) as u16
            })
            .collect();
        Self::new(labels, num_classes)
    }
}

/// Fraction of positions where `x` disagrees with `x_t`.
pub fn label_error(x: &LabelVector, x_t: &LabelVector) -> Result<f64, DelError> {
    Ok(x.mismatches(x_t)? as f64 / x_t.len() as f64)
}

/// Perturbs `x_t`: picks `v` uniformly in `1..=m`, then re-draws the labels
/// at `v` distinct uniformly chosen positions uniformly from `1..=C`. A
/// re-drawn label may coincide with the original one.
pub fn generate_data<R: Rng + ?Sized>(x_t: &LabelVector, rng: &mut R) -> LabelVector {
    let m = x_t.len();
    let v = rng.random_range(1..=m);
    let mut labels = x_t.labels.clone();
    for k in sample(rng, m, v) {
        labels[k] = rng.random_range(1..=x_t.num_classes);
    }
    LabelVector {
        labels,
        num_classes: x_t.num_classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lv(v: &[u16], c: u16) -> LabelVector {
        LabelVector::new(v.to_vec(), c).unwrap()
    }

    #[test]
    fn validation() {
        assert!(LabelVector::new(vec![], 3).is_err());
        assert!(LabelVector::new(vec![1, 2], 1).is_err());
        assert!(LabelVector::new(vec![0, 2], 3).is_err());
        assert!(LabelVector::new(vec![1, 4], 3).is_err());
        assert!(serde_json::from_str::<LabelVector>(r#"{"num_classes":3,"labels":[1,5]}"#).is_err());
    }

    #[test]
    fn error_examples() {
        let x_t = lv(&[1, 2, 3, 4], 4);
        assert_eq!(label_error(&x_t, &x_t).unwrap(), 0.0);
        assert_eq!(label_error(&lv(&[2, 3, 4, 1], 4), &x_t).unwrap(), 1.0);
        assert_eq!(label_error(&lv(&[1, 2, 4, 3], 4), &x_t).unwrap(), 0.5);
        assert!(matches!(
            label_error(&lv(&[1, 2, 3], 4), &x_t),
            Err(DelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn encode_decode_round_trip() {
        let x = lv(&[1, 5, 10, 3, 7], 10);
        let enc: Vec<f64> = x.encode();
        assert_eq!(enc[0], -0.45);
        assert_eq!(LabelVector::decode(&enc, 10).unwrap(), x);
        let clamped = LabelVector::decode(&[-5.0_f64, 5.0, f64::NAN], 10).unwrap();
        assert_eq!(clamped.labels(), &[1, 10, 6]);
    }

    #[test]
    fn generate_data_is_reproducible_and_bounded() {
        let x_t = LabelVector::random(200, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let a = generate_data(&x_t, &mut ChaCha8Rng::seed_from_u64(2));
        let b = generate_data(&x_t, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = generate_data(&x_t, &mut rng);
            let e = label_error(&x, &x_t).unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn generate_data_can_return_target_unchanged() {
        // m = 1, C = 2: the single re-draw keeps the old label half the time.
        let x_t = lv(&[2], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let unchanged = (0..200).filter(|_| generate_data(&x_t, &mut rng) == x_t).count();
        assert!(unchanged > 50 && unchanged < 150);
    }
}
