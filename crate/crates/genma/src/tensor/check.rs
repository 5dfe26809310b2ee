//! Central-finite-difference gradient checking.

use super::{Tape, Tensor};
use crate::error::{Error, Result};

/// Outcome of one gradient check. `rel_errors[i]` compares the analytic
/// partial derivative at coordinate `i` against a central finite difference;
/// `max_rel_error` is their maximum, with the worst coordinate and both of
/// its values kept for diagnostics.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_errors: Vec<f64>,
    pub pass: bool,
}

/// Compares the analytic gradient of `f` at `x` against central finite
/// differences `(f(x+h) − f(x−h)) / 2h`, coordinate by coordinate.
///
/// `f` must build a scalar result on the tape it is given and must be
/// deterministic: it is re-evaluated twice per coordinate with `x` perturbed
/// in place. `x` may be any tensor participating in `f`'s graph — an input or
/// a parameter captured by the closure (perturbation and gradient readout go
/// through the shared storage either way).
///
/// The per-coordinate error is `|a − n| / max(1, |a|, |n|)`: a relative error
/// for large derivatives that degrades to an absolute error near zero, so
/// vanishing gradients do not divide by zero.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &Tensor) -> Result<Tensor>,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "grad_check: step must be positive, got {h}"
        )));
    }
    let tape = Tape::new();
    let root = f(&tape, x)?;
    if !root.is_scalar() {
        return Err(Error::InvalidArgument(format!(
            "grad_check: function must be scalar-valued, got shape {:?}",
            root.shape()
        )));
    }
    x.clear_grad();
    tape.backward(&root)?;
    let analytic = x.grad().unwrap_or_else(|| vec![0.0; x.numel()]);

    let eval = |x: &Tensor| -> Result<f64> {
        let tape = Tape::new();
        let out = f(&tape, x)?;
        Ok(out.item())
    };

    let mut rel_errors = Vec::with_capacity(x.numel());
    let mut worst = (0usize, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.numel() {
        let original = x.data()[i];
        x.data_mut()[i] = original + h;
        let plus = eval(x)?;
        x.data_mut()[i] = original - h;
        let minus = eval(x)?;
        x.data_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = 1.0_f64.max(analytic[i].abs()).max(numeric.abs());
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel >= worst.1 {
            worst = (i, rel, analytic[i], numeric);
        }
        rel_errors.push(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: worst.1,
        worst_coordinate: worst.0,
        analytic: worst.2,
        numeric: worst.3,
        rel_errors,
        pass: worst.1 <= tol,
    })
}
