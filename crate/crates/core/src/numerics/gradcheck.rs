use super::{MlpParams, NumericsError};
use crate::scalar::Scalar;

/// Central finite differences of a scalar function of the parameters.
pub fn finite_difference_gradient<T, F>(params: &MlpParams<T>, step: T, mut loss: F) -> Result<Vec<T>, NumericsError>
where
    T: Scalar,
    F: FnMut(&MlpParams<T>) -> Result<T, NumericsError>,
{
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.as_slice().len());
    for i in 0..params.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + step;
        let up = loss(&probe)?;
        probe.as_mut_slice()[i] = orig - step;
        let down = loss(&probe)?;
        probe.as_mut_slice()[i] = orig;
        grad.push((up - down) / (step + step));
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares [`MlpParams::gradient`] with central differences of
/// `θ ↦ ⟨loss_tail, f_θ(input)⟩`.
///
/// Relative error per entry is `|a − n| / max(|a|, |n|, floor)`; the floor
/// keeps entries whose true gradient is essentially zero from dominating.
pub fn check_gradient(
    params: &MlpParams<f64>,
    input: &[f64],
    loss_tail: &[f64],
    step: f64,
    floor: f64,
) -> Result<GradCheckReport, NumericsError> {
    let analytic = params.gradient(input, loss_tail)?;
    let numeric = finite_difference_gradient(params, step, |p| {
        let out = p.forward_train(input)?.output;
        Ok(out.iter().zip(loss_tail).map(|(y, g)| y * g).sum())
    })?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (i, (&a, &n)) in analytic.as_slice().iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if err > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: err,
                worst_index: i,
                analytic: a,
                numeric: n,
            };
        }
    }
    Ok(report)
}
