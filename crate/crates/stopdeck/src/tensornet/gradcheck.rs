//! Finite-difference verification of the reverse pass.
//!
//! Central differences assume the loss is smooth within ±eps of the check
//! point. ReLU networks violate that wherever a pre-activation sits within
//! the probe step of zero, so callers should check at points whose kink
//! margin comfortably exceeds eps (the acceptance suite verifies the
//! margin with an independent forward pass before probing).

use crate::error::{Error, Result};
use crate::tensornet::{Network, Tensor};

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// max over parameters of |analytic − numeric| / max(|analytic|, |numeric|)
    pub max_rel_err: f64,
    /// parameters compared against the relative criterion
    pub checked: usize,
    /// parameters where both gradients were below the absolute floor
    pub skipped: usize,
}

/// Central-difference gradient of an arbitrary scalar functional of the
/// network parameters.
pub fn central_difference_grads<F>(net: &mut Network, mut loss: F, eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&Network) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    let n = net.param_len();
    let mut grads = vec![0.0; n];
    for i in 0..n {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + eps;
        let up = loss(net)?;
        net.params_mut()[i] = orig - eps;
        let down = loss(net)?;
        net.params_mut()[i] = orig;
        grads[i] = (up - down) / (2.0 * eps);
    }
    Ok(grads)
}

/// Compares two gradient vectors; entries where both magnitudes fall below
/// `atol` are counted as skipped rather than compared.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], atol: f64) -> GradCheckReport {
    let mut max_rel_err = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs());
        if denom < atol {
            skipped += 1;
            continue;
        }
        checked += 1;
        max_rel_err = max_rel_err.max((a - n).abs() / denom);
    }
    GradCheckReport {
        max_rel_err,
        checked,
        skipped,
    }
}

/// Checks `backward_batch` against central differences for the scalar
/// functional L(θ) = Σ_i coeffs[i] · output_i(θ) over the given batch.
pub fn grad_check(
    net: &mut Network,
    input: &Tensor,
    coeffs: &[f64],
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    let (out, cache) = net.forward_batch(input)?;
    if coeffs.len() != out.len() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector has {} entries, outputs have {}",
            coeffs.len(),
            out.len()
        )));
    }
    let mut analytic = vec![0.0; net.param_len()];
    net.backward_batch(input, &cache, coeffs, &mut analytic)?;
    let numeric = central_difference_grads(
        net,
        |n| {
            let out = n.predict_batch(input)?;
            Ok(out.iter().zip(coeffs).map(|(o, c)| o * c).sum())
        },
        eps,
    )?;
    Ok(max_rel_error(&analytic, &numeric, 1e-8))
}
