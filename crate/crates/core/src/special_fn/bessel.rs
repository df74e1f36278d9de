//! Modified Bessel function of the first kind by its power series.

use super::gamma::ln_gamma;
use super::{check_finite, Tolerance};
use crate::error::{Error, Result};

/// `I_a(z) = Σ_m (z/2)^{2m+a} / (m! Γ(m+a+1))` for `a ≥ -1`, `z ≥ 0`.
///
/// Terms are summed until one falls below `rel_tol` times the partial sum.
/// Every term is positive, so the series has no cancellation.
pub fn bessel_i(a: f64, z: f64) -> Result<f64> {
    check_finite("order", a)?;
    check_finite("z", z)?;
    if a < -1.0 {
        return Err(Error::domain(format!("Bessel order must be >= -1, got {a}")));
    }
    if z < 0.0 {
        return Err(Error::domain(format!("Bessel argument must be >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(if a == 0.0 {
            1.0
        } else if a > 0.0 || a == -1.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let tol = Tolerance::series();
    let half = 0.5 * z;
    let ln_half = half.ln();
    let q = half * half;
    // For a = -1 the m = 0 term vanishes (1/Γ(0) = 0); start at m = 1.
    let start = if a == -1.0 { 1usize } else { 0 };
    let m0 = start as f64;
    let mut term = ((2.0 * m0 + a) * ln_half - ln_gamma(m0 + 1.0) - ln_gamma(m0 + a + 1.0)).exp();
    let mut sum = term;
    let mut m = m0;
    for _ in 0..tol.max_iter {
        term *= q / ((m + 1.0) * (m + a + 1.0));
        m += 1.0;
        sum += term;
        // Terms decrease once m exceeds ~z/2.
        if m > half && term <= tol.rel_tol * sum {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "Bessel I series",
        achieved: term / sum,
        iterations: tol.max_iter,
    })
}
