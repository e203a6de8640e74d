use rand::Rng;
use rand::seq::index::sample;

use super::SimError;
use crate::del::LabelVector;
use crate::poi::ModelArtifact;

/// A lookup model whose predictions differ from `x_t` in exactly
/// `round(target_error · m)` positions, each moved to a uniformly chosen
/// different class.
pub fn synth_model<R: Rng + ?Sized>(
    x_t: &LabelVector,
    target_error: f64,
    rng: &mut R,
) -> Result<ModelArtifact, SimError> {
    if !(0.0..=1.0).contains(&target_error) {
        return Err(SimError::Config(format!("target error {target_error} outside [0, 1]")));
    }
    let m = x_t.len();
    let c = x_t.num_classes();
    let flips = ((target_error * m as f64).round() as usize).min(m);
    let mut labels = x_t.labels().to_vec();
    for i in sample(rng, m, flips) {
        // uniform over the C − 1 other classes
        let offset = rng.random_range(1..c);
        labels[i] = (labels[i] - 1 + offset) % c + 1;
    }
    let predicted = LabelVector::new(labels, c)?;
    Ok(ModelArtifact::new(predicted, format!("synthetic, {flips} of {m} labels wrong")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::del::label_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x_t() -> LabelVector {
        LabelVector::random(1000, 10, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    }

    #[test]
    fn exact_error_levels() {
        let x_t = x_t();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(synth_model(&x_t, 0.0, &mut rng).unwrap().predicted_labels, x_t);
        for e in [0.25, 0.0004, 0.0006, 0.5, 1.0] {
            let m = synth_model(&x_t, e, &mut rng).unwrap();
            let expect = (e * 1000.0).round() / 1000.0;
            assert_eq!(label_error(&m.predicted_labels, &x_t).unwrap(), expect);
        }
        assert!(synth_model(&x_t, 1.1, &mut rng).is_err());
    }

    #[test]
    fn replacement_classes_are_spread() {
        let x_t = LabelVector::new(vec![1; 9000], 10).unwrap();
        let m = synth_model(&x_t, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut counts = [0usize; 11];
        for &l in m.predicted_labels.labels() {
            counts[l as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        // 1000 expected per class, σ ≈ 30
        assert!(counts[2..].iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }
}
