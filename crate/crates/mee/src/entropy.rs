//! Parzen density estimation and empirical entropy functionals of an error
//! vector.
//!
//! The density estimate and both entropies are computed exactly as their
//! defining sums, unnormalized: with the Gaussian window the Parzen estimate
//! integrates to sqrt(2*pi), not 1. The missing constant only shifts the
//! entropies, so minimizers are unaffected.
//!
//! Pairwise sums run over a canonically sorted copy of the errors with a
//! compensated accumulator in fixed lexicographic order, so any permutation
//! of the same error values produces bit-identical results.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::MeeError;
use crate::stats::NeumaierSum;
use crate::windowing::WindowingFunction;

/// Residual vector `e_i = y_i - f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector {
    values: Vec<f64>,
}

impl ErrorVector {
    /// Build from raw residuals. Requires at least one finite entry; the
    /// pairwise entropy functionals additionally require two.
    pub fn new(values: Vec<f64>) -> Result<Self, MeeError> {
        if values.is_empty() {
            return Err(MeeError::invalid("errors", "must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MeeError::NonFinite("error vector"));
        }
        Ok(Self { values })
    }

    pub fn sample_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

static SMALL_H_WARNED: AtomicBool = AtomicBool::new(false);

fn check_scaling(h: f64) -> Result<(), MeeError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeeError::invalid("h", format!("must be positive, got {h}")));
    }
    // The theory assumes h >= 1 throughout; smaller values are accepted but
    // noted once per process.
    if h < 1.0 && !SMALL_H_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("scaling parameter h = {h} < 1; consistency guarantees assume h >= 1");
    }
    Ok(())
}

fn require_pairs(errors: &ErrorVector) -> Result<(), MeeError> {
    if errors.sample_size() < 2 {
        return Err(MeeError::invalid("errors", "need sample size m >= 2"));
    }
    Ok(())
}

fn sorted_values(errors: &ErrorVector) -> Vec<f64> {
    let mut v = errors.values.clone();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Parzen window density estimate at `e`:
/// `(1/(m h)) * sum_i G((e - e_i)^2 / (2 h^2))`.
pub fn parzen_density(
    e: f64,
    errors: &ErrorVector,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    if !e.is_finite() {
        return Err(MeeError::NonFinite("query point"));
    }
    check_scaling(h)?;
    let inv = 1.0 / (2.0 * h * h);
    let mut acc = NeumaierSum::new();
    for &ei in errors.values() {
        let d = e - ei;
        acc.add(window.eval(d * d * inv));
    }
    Ok(acc.value() / (errors.sample_size() as f64 * h))
}

/// Information potential
/// `(1/(m^2 h)) * sum_i sum_j G((e_i - e_j)^2 / (2 h^2))`,
/// the argument of the logarithm in the quadratic Renyi entropy. The double
/// sum includes the diagonal `i = j`.
pub fn information_potential(
    errors: &ErrorVector,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    check_scaling(h)?;
    require_pairs(errors)?;
    let v = sorted_values(errors);
    let m = v.len();
    let inv = 1.0 / (2.0 * h * h);
    let mut acc = NeumaierSum::new();
    for i in 0..m {
        for j in 0..m {
            let d = v[i] - v[j];
            acc.add(window.eval(d * d * inv));
        }
    }
    Ok(acc.value() / ((m * m) as f64 * h))
}

/// Empirical quadratic Renyi entropy: `-log` of the information potential.
///
/// Fails with [`MeeError::NonpositivePotential`] when the potential is not
/// positive, which can only happen for sign-changing windows.
pub fn empirical_renyi2(
    errors: &ErrorVector,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    let ip = information_potential(errors, h, window)?;
    if !(ip > 0.0) {
        return Err(MeeError::NonpositivePotential(ip));
    }
    Ok(-ip.ln())
}

/// Empirical Shannon entropy:
/// `-(1/m) * sum_i log[(1/(m h)) * sum_j G((e_i - e_j)^2 / (2 h^2))]`.
///
/// Diagnostic only; the learner never trains on it.
pub fn empirical_shannon(
    errors: &ErrorVector,
    h: f64,
    window: &WindowingFunction,
) -> Result<f64, MeeError> {
    check_scaling(h)?;
    require_pairs(errors)?;
    let v = sorted_values(errors);
    let m = v.len();
    let scale = 1.0 / (m as f64 * h);
    let inv = 1.0 / (2.0 * h * h);
    let mut outer = NeumaierSum::new();
    for i in 0..m {
        let mut inner = NeumaierSum::new();
        for j in 0..m {
            let d = v[i] - v[j];
            inner.add(window.eval(d * d * inv));
        }
        let p = inner.value() * scale;
        if !(p > 0.0) {
            return Err(MeeError::NonpositivePotential(p));
        }
        outer.add(p.ln());
    }
    Ok(-outer.value() / m as f64)
}
