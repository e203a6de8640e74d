//! Self-contained numerical kernel: a one-hidden-layer ReLU perceptron with
//! an optional unit-norm head, the Adam optimizer, central finite-difference
//! gradient checking, and the regularized incomplete beta function.

mod adam;
mod beta;
mod gradcheck;
mod mlp;

pub use adam::{AdamConfig, AdamState, adam_step};
pub use beta::{ln_beta, ln_gamma, ln_reg_inc_beta, reg_inc_beta};
pub use gradcheck::{GradCheckReport, check_gradient, finite_difference_gradient};
pub use mlp::{ForwardCache, MlpInput, MlpParams, NORM_FLOOR, ParamsDocument};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("degenerate output: pre-normalization norm {norm:e} is below {floor:e}")]
    DegenerateOutput { norm: f64, floor: f64 },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("continued fraction did not converge for x={x}, a={a}, b={b}")]
    NoConvergence { x: f64, a: f64, b: f64 },
    #[error("malformed parameter document: {0}")]
    Format(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NumericsError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
