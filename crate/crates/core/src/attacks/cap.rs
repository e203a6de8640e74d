use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::numerics::{ln_reg_inc_beta, reg_inc_beta};
use crate::scalar::Scalar;

/// Expected hit count below which [`monte_carlo_cap`] refuses to run.
pub const MIN_EXPECTED_HITS: f64 = 50.0;

fn check_cap_args<T: Scalar>(n: usize, epsilon: T) -> Result<(), AttackError> {
    if n < 2 {
        return Err(AttackError::Domain(format!("dimension n={n} must be at least 2")));
    }
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(AttackError::Domain(format!("epsilon={epsilon} must lie in (0, 1]")));
    }
    Ok(())
}

/// `sin²β` for the cap `{y : d(y, y_t) < ε}`, where `cos β = 1 − ε`.
fn sin_sq<T: Scalar>(epsilon: T) -> T {
    (T::lit(2.0) * epsilon - epsilon * epsilon).min(T::one())
}

/// Probability that a uniformly random unit vector on the hemisphere
/// `⟨y, y_t⟩ ≥ 0` lands within modified cosine distance `ε` of `y_t`:
/// `I_{sin²β}((n−1)/2, 1/2)`.
pub fn cap_probability<T: Scalar>(n: usize, epsilon: T) -> Result<T, AttackError> {
    check_cap_args(n, epsilon)?;
    let a = T::lit((n as f64 - 1.0) / 2.0);
    Ok(reg_inc_beta(sin_sq(epsilon), a, T::lit(0.5))?)
}

/// Natural log of [`cap_probability`]; finite even where `p` underflows.
pub fn ln_cap_probability<T: Scalar>(n: usize, epsilon: T) -> Result<T, AttackError> {
    check_cap_args(n, epsilon)?;
    let a = T::lit((n as f64 - 1.0) / 2.0);
    Ok(ln_reg_inc_beta(sin_sq(epsilon), a, T::lit(0.5))?)
}

/// Trials needed for success probability `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialCount {
    /// `α / p`, from `α ≈ p·q`.
    pub linearized: f64,
    /// `ln(1−α) / ln(1−p)`; `None` when `α = 1` (no finite count reaches
    /// certainty unless `p = 1`).
    pub exact: Option<f64>,
}

pub fn required_trials(p: f64, alpha: f64) -> Result<TrialCount, AttackError> {
    if p == 0.0 {
        return Err(AttackError::InfiniteTrials);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(AttackError::Domain(format!("p={p} must lie in (0, 1]")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AttackError::Domain(format!("alpha={alpha} must lie in (0, 1]")));
    }
    let exact = if p == 1.0 {
        Some(1.0)
    } else if alpha < 1.0 {
        // ln_1p keeps precision for tiny p, where 1 − p rounds to 1.
        Some(((-alpha).ln_1p() / (-p).ln_1p()).max(1.0))
    } else {
        None
    };
    Ok(TrialCount {
        linearized: alpha / p,
        exact,
    })
}

/// One row of the brute-force analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapAnalysis {
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub p: f64,
    /// `None` when `p` underflows to zero.
    pub trials: Option<TrialCount>,
}

impl CapAnalysis {
    pub fn compute(n: usize, epsilon: f64, alpha: f64) -> Result<Self, AttackError> {
        let p = cap_probability(n, epsilon)?;
        let trials = match required_trials(p, alpha) {
            Ok(t) => Some(t),
            Err(AttackError::InfiniteTrials) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            n,
            epsilon,
            alpha,
            p,
            trials,
        })
    }
}

/// `n,epsilon,p,q_linearized,q_exact` table over the cartesian grid.
/// Infinite counts print as `inf`; an exact count that does not exist
/// because `p = 0` prints as `infeasible`, and because `α = 1` as `inf`.
pub fn cap_grid_csv(ns: &[usize], epsilons: &[f64], alpha: f64) -> Result<String, AttackError> {
    let mut out = String::from("n,epsilon,p,q_linearized,q_exact\n");
    for &n in ns {
        for &eps in epsilons {
            let row = CapAnalysis::compute(n, eps, alpha)?;
            let (lin, exact) = match row.trials {
                Some(t) => (
                    format!("{:?}", t.linearized),
                    t.exact.map_or_else(|| "inf".to_string(), |q| format!("{q:?}")),
                ),
                None => ("inf".to_string(), "infeasible".to_string()),
            };
            out.push_str(&format!("{n},{eps:?},{:?},{lin},{exact}\n", row.p));
        }
    }
    Ok(out)
}

/// Empirical cap probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapEstimate {
    pub trials: u64,
    pub hits: u64,
    pub p: f64,
    pub std_error: f64,
    /// 95% normal-approximation interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CapEstimate {
    /// `|p̂ − p| / σ`, with σ taken from the reference value.
    pub fn z_score(&self, reference: f64) -> f64 {
        let sigma = (reference * (1.0 - reference) / self.trials as f64).sqrt();
        (self.p - reference) / sigma
    }
}

/// Draws normalized Gaussian vectors, reflects them into the hemisphere
/// around `e_1`, and counts those within distance `ε` of `e_1`.
pub fn monte_carlo_cap<R: Rng + ?Sized>(
    n: usize,
    epsilon: f64,
    trials: u64,
    rng: &mut R,
) -> Result<CapEstimate, AttackError> {
    let p = cap_probability(n, epsilon)?;
    let expected_hits = p * trials as f64;
    if !(expected_hits >= MIN_EXPECTED_HITS) {
        return Err(AttackError::Infeasible {
            expected_hits,
            trials,
            min_hits: MIN_EXPECTED_HITS,
        });
    }
    let threshold = 1.0 - epsilon;
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut sq = 0.0;
        let mut lead = 0.0_f64;
        for i in 0..n {
            let g: f64 = rng.sample(StandardNormal);
            if i == 0 {
                lead = g;
            }
            sq += g * g;
        }
        // d < ε  ⇔  cos > 1 − ε on the reflected vector
        if lead.abs() > threshold * sq.sqrt() {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let std_error = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    Ok(CapEstimate {
        trials,
        hits,
        p: p_hat,
        std_error,
        ci_low: (p_hat - 1.96 * std_error).max(0.0),
        ci_high: (p_hat + 1.96 * std_error).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn whole_hemisphere_at_epsilon_one() {
        for n in [2, 3, 32, 256] {
            assert_eq!(cap_probability(n, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn circle_closed_form() {
        // n = 2: the cap is an arc of half-angle β out of a half circle.
        for eps in [0.05, 0.3, 0.7] {
            let beta = (1.0_f64 - eps).acos();
            let p: f64 = cap_probability(2, eps).unwrap();
            assert!((p - 2.0 * beta / std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_closed_form() {
        // n = 3: cap area 2π(1 − cos β) over hemisphere area 2π, so p = ε.
        for eps in [0.01, 0.2, 0.9] {
            assert!((cap_probability::<f64>(3, eps).unwrap() - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_over_grid() {
        let ns = [2, 4, 8, 16, 32, 64, 128, 256];
        let eps: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        for &n in &ns {
            let ps: Vec<f64> = eps.iter().map(|&e| ln_cap_probability::<f64>(n, e).unwrap()).collect();
            assert!(ps.windows(2).all(|w| w[1] > w[0]), "n={n}");
        }
        for &e in &eps[..eps.len() - 1] {
            let ps: Vec<f64> = ns.iter().map(|&n| ln_cap_probability(n, e).unwrap()).collect();
            assert!(ps.windows(2).all(|w| w[1] < w[0]), "eps={e}");
        }
    }

    #[test]
    fn log_form_agrees() {
        let p: f64 = cap_probability(32, 0.1).unwrap();
        assert!((ln_cap_probability(32, 0.1).unwrap() - p.ln()).abs() < 1e-10);
    }

    #[test]
    fn domain_errors() {
        assert!(cap_probability(1, 0.5).is_err());
        assert!(cap_probability(4, 0.0).is_err());
        assert!(cap_probability(4, 1.5).is_err());
        assert!(cap_probability(4, f64::NAN).is_err());
    }

    #[test]
    fn trial_counts() {
        let t = required_trials(0.5, 0.5).unwrap();
        assert_eq!(t.linearized, 1.0);
        assert_eq!(t.exact, Some(1.0));
        let t = required_trials(1e-3, 0.5).unwrap();
        assert!((t.exact.unwrap() - (0.5f64).ln() / (0.999f64).ln()).abs() < 1e-9);
        assert_eq!(required_trials(1e-3, 1.0).unwrap().exact, None);
        assert_eq!(required_trials(0.0, 0.5), Err(AttackError::InfiniteTrials));
        assert!(required_trials(0.5, 0.0).is_err());
        // tiny p: exact and linearized agree to first order
        let t = required_trials(1e-40, 1e-3).unwrap();
        assert!((t.exact.unwrap() / t.linearized - 1.0).abs() < 1e-3);
    }

    #[test]
    fn grid_csv_marks_underflow() {
        let csv = cap_grid_csv(&[3, 4096], &[0.5, 0.001], 1.0).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,epsilon,p,q_linearized,q_exact"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&row[..2], ["3", "0.5"]);
        assert!((row[2].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
        assert!((row[3].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(row[4], "inf");
        let underflow = csv.lines().last().unwrap();
        assert_eq!(underflow, "4096,0.001,0.0,inf,infeasible");
    }

    #[test]
    fn monte_carlo_trivial_and_refusal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = monte_carlo_cap(3, 1.0, 1000, &mut rng).unwrap();
        assert_eq!(est.hits, 1000);
        assert!(matches!(
            monte_carlo_cap(32, 0.1, 1_000_000, &mut rng),
            Err(AttackError::Infeasible { .. })
        ));
    }

    #[test]
    fn monte_carlo_small_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let est = monte_carlo_cap(5, 0.4, 200_000, &mut rng).unwrap();
        let p = cap_probability(5, 0.4).unwrap();
        assert!(est.z_score(p).abs() < 3.0, "{est:?} vs {p}");
        assert!(est.ci_low < p && p < est.ci_high);
    }
}
