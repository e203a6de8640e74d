use serde::{Deserialize, Serialize};

use super::DelError;
use crate::numerics::NORM_FLOOR;
use crate::scalar::Scalar;

/// Output of a DEL function: a unit-norm point in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T = f64> {
    values: Vec<T>,
}

fn unit_tolerance<T: Scalar>() -> f64 {
    (16.0 * T::epsilon().to_f64_lossy()).max(1e-9)
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Wraps `values`, which must already have unit L2 norm.
    pub fn from_unit(values: Vec<T>) -> Result<Self, DelError> {
        let norm = values.iter().map(|&v| v * v).sum::<T>().sqrt().to_f64_lossy();
        if values.is_empty() || !((norm - 1.0).abs() <= unit_tolerance::<T>()) {
            return Err(DelError::NotUnitNorm(norm));
        }
        Ok(Self { values })
    }

    /// Scales `values` to unit length.
    pub fn normalized(values: Vec<T>) -> Result<Self, DelError> {
        let norm = values.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm.to_f64_lossy() >= NORM_FLOOR) {
            return Err(DelError::NotUnitNorm(norm.to_f64_lossy()));
        }
        Self::from_unit(values.into_iter().map(|v| v / norm).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl Serialize for EmbeddingVector<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::serde_dec::vec::serialize(&self.values, s)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = crate::serde_dec::vec::deserialize(d)?;
        Self::from_unit(values).map_err(serde::de::Error::custom)
    }
}

/// Modified cosine distance: `1 − cos(y1, y2)` when the dot product is
/// nonnegative, `1` otherwise. Bitwise-equal inputs are at distance exactly 0.
pub fn distance<T: Scalar>(y1: &EmbeddingVector<T>, y2: &EmbeddingVector<T>) -> Result<T, DelError> {
    raw_distance(&y1.values, &y2.values)
}

/// [`distance`] on raw unit vectors.
pub fn raw_distance<T: Scalar>(y1: &[T], y2: &[T]) -> Result<T, DelError> {
    if y1.len() != y2.len() {
        return Err(DelError::LengthMismatch {
            expected: y1.len(),
            actual: y2.len(),
        });
    }
    if y1 == y2 {
        return Ok(T::zero());
    }
    let dot: T = y1.iter().zip(y2).map(|(&a, &b)| a * b).sum();
    Ok(distance_from_dot(dot))
}

pub(crate) fn distance_from_dot<T: Scalar>(dot: T) -> T {
    if dot >= T::zero() {
        (T::one() - dot).max(T::zero()).min(T::one())
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let y = unit(&[0.3, -0.2, 0.9]);
        assert_eq!(distance(&y, &y).unwrap(), 0.0);
        let e1 = unit(&[1.0, 0.0, 0.0]);
        let e2 = unit(&[0.0, 1.0, 0.0]);
        assert_eq!(distance(&e1, &e2).unwrap(), 1.0);
        let neg = unit(&[-0.3, 0.2, -0.9]);
        assert_eq!(distance(&y, &neg).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[1.0, 0.0, 0.0]);
        assert!(matches!(distance(&a, &b), Err(DelError::LengthMismatch { .. })));
    }

    #[test]
    fn non_unit_rejected() {
        assert!(EmbeddingVector::from_unit(vec![1.0, 1.0]).is_err());
        assert!(EmbeddingVector::<f64>::normalized(vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::<f64>::from_unit(vec![]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let y = unit(&[0.1, 0.2, 0.3, -0.7]);
        let s = serde_json::to_string(&y).unwrap();
        let back: EmbeddingVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, y);
    }
}
