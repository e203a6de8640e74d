use super::{MlpParams, NumericsError, check_len};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_learning_rate(learning_rate: T) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moment accumulators over a flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig<T>,
    first: Vec<T>,
    second: Vec<T>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig<T>) -> Self {
        Self {
            config,
            first: vec![T::zero(); len],
            second: vec![T::zero(); len],
            step: 0,
        }
    }

    pub fn for_params(params: &MlpParams<T>, config: AdamConfig<T>) -> Self {
        Self::new(params.as_slice().len(), config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[T] {
        &self.first
    }

    pub fn second_moment(&self) -> &[T] {
        &self.second
    }

    /// Overrides the step counter; moments are left untouched.
    pub fn with_step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    /// One bias-corrected Adam update of `params` in place.
    ///
    /// Rejects non-finite gradients before touching any state.
    pub fn update(&mut self, params: &mut [T], grads: &[T]) -> Result<(), NumericsError> {
        check_len("adam parameters", self.first.len(), params.len())?;
        check_len("adam gradients", self.first.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NumericsError::NonFinite {
                what: "gradient",
                index: i,
            });
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = T::one() - beta1.powi(t);
        let bc2 = T::one() - beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = beta1 * *m + (T::one() - beta1) * g;
            *v = beta2 * *v + (T::one() - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(NumericsError::NonFinite {
                what: "parameters after adam step",
                index: i,
            });
        }
        Ok(())
    }

    pub fn update_params(&mut self, params: &mut MlpParams<T>, grads: &MlpParams<T>) -> Result<(), NumericsError> {
        if !params.same_shape(grads) {
            return Err(NumericsError::DimensionMismatch {
                what: "adam gradients",
                expected: params.as_slice().len(),
                actual: grads.as_slice().len(),
            });
        }
        self.update(params.as_mut_slice(), grads.as_slice())
    }
}

/// Functional form of one Adam step: returns the new parameters and state.
pub fn adam_step<T: Scalar>(
    params: &MlpParams<T>,
    grads: &MlpParams<T>,
    state: &AdamState<T>,
) -> Result<(MlpParams<T>, AdamState<T>), NumericsError> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.update_params(&mut p, grads)?;
    Ok((p, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let params = MlpParams::<f64>::init_uniform(3, 4, 2, &mut ChaCha8Rng::seed_from_u64(0));
        let grads = params.zeros_like();
        for step in [0, 1, 17, 1000] {
            let state = AdamState::for_params(&params, AdamConfig::default()).with_step(step);
            let (next, next_state) = adam_step(&params, &grads, &state).unwrap();
            assert_eq!(next, params);
            assert_eq!(next_state.step_count(), step + 1);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so Δ = lr · g / (|g| + ε)
        let mut state = AdamState::new(1, AdamConfig::with_learning_rate(0.1));
        let mut p = [0.0_f64];
        state.update(&mut p, &[1.0]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut state = AdamState::new(1, AdamConfig::with_learning_rate(0.1));
        let mut p = [0.0_f64];
        let mut prev = p[0];
        for _ in 0..100 {
            state.update(&mut p, &[1.0]).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
        assert_eq!(state.step_count(), 100);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut state = AdamState::new(2, AdamConfig::<f64>::default());
        let mut p = [1.0, 2.0];
        let err = state.update(&mut p, &[0.5, f64::NAN]).unwrap_err();
        assert_eq!(
            err,
            NumericsError::NonFinite {
                what: "gradient",
                index: 1
            }
        );
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = MlpParams::<f64>::zeros(2, 2, 2);
        let b = MlpParams::<f64>::zeros(2, 3, 2);
        let state = AdamState::for_params(&a, AdamConfig::default());
        assert!(adam_step(&a, &b, &state).is_err());
    }
}
