use super::ChainError;
use crate::numerics::reg_inc_beta;

/// `I_{1−d}(a, ½) − I_{1−d_c}(a, ½)` for any `d, d_c ∈ [0, 1]`.
pub fn reward_function(d: f64, d_c: f64, a: f64) -> Result<f64, ChainError> {
    for (name, v) in [("d", d), ("d_c", d_c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ChainError::Contract(format!("{name}={v} outside [0, 1]")));
        }
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(ChainError::Contract(format!("reward shape a={a} must be positive")));
    }
    let beta = |x: f64| reg_inc_beta(x, a, 0.5).map_err(|e| ChainError::Contract(e.to_string()));
    Ok(beta(1.0 - d)? - beta(1.0 - d_c)?)
}

/// Reward for improving the best distance from `d_c` to `d`; requires
/// `0 ≤ d < d_c ≤ 1`.
pub fn reward(d: f64, d_c: f64, a: f64) -> Result<f64, ChainError> {
    if !(d < d_c) {
        return Err(ChainError::Contract(format!("reward needs d < d_c, got d={d}, d_c={d_c}")));
    }
    reward_function(d, d_c, a)
}

/// `base · 2^{−s}` for the `s`-th validator (1-based).
pub fn validator_reward(base: f64, s: u32) -> Result<f64, ChainError> {
    if s < 1 {
        return Err(ChainError::Contract("validator position s starts at 1".into()));
    }
    Ok(base * 2f64.powi(-(s as i32)))
}

/// `(d, R(d, d_c))` at `points` evenly spaced `d ∈ [0, d_c]`.
pub fn reward_curve(d_c: f64, a: f64, points: usize) -> Result<Vec<(f64, f64)>, ChainError> {
    let steps = points.max(2) - 1;
    (0..=steps)
        .map(|i| {
            let d = d_c * i as f64 / steps as f64;
            Ok((d, reward_function(d, d_c, a)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_exact() {
        assert_eq!(reward(0.0, 1.0, 3.0).unwrap(), 1.0);
        for d_c in [0.0, 0.2, 0.7, 1.0] {
            assert_eq!(reward_function(d_c, d_c, 3.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_non_improvement() {
        assert!(reward(0.5, 0.5, 3.0).is_err());
        assert!(reward(0.6, 0.5, 3.0).is_err());
        assert!(reward(-0.1, 0.5, 3.0).is_err());
        assert!(reward(0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn grows_as_distance_shrinks() {
        for d_c in [0.2, 0.5, 1.0] {
            let curve = reward_curve(d_c, 3.0, 50).unwrap();
            assert!(curve.windows(2).all(|w| w[0].1 > w[1].1), "d_c={d_c}");
            assert_eq!(curve.last().unwrap().1, 0.0);
        }
        // bigger gap, bigger reward
        assert!(reward(0.1, 0.5, 3.0).unwrap() > reward(0.1, 0.3, 3.0).unwrap());
    }

    #[test]
    fn closed_form_at_a_one() {
        // I_x(1, ½) = 1 − √(1−x), so R = √d_c − √d.
        let r = reward(0.09, 0.64, 1.0).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validator_shares() {
        assert_eq!(validator_reward(1.0, 1).unwrap(), 0.5);
        assert_eq!(validator_reward(1.0, 3).unwrap(), 0.125);
        assert!(validator_reward(1.0, 0).is_err());
        let total: f64 = (1..=30).map(|s| validator_reward(1.0, s).unwrap()).sum();
        assert!(total < 1.0);
    }
}
