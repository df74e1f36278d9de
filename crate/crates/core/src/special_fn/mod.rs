//! Special-function kernels shared by every other module.
//!
//! Everything here is pure and stateless. The public `Result`-returning entry
//! points validate their arguments; the `pub(crate)` helpers skip validation
//! and are used on hot paths where the caller has already checked the domain.

mod bessel;
mod chi2;
mod gamma;
mod normal;
pub mod quad;
pub mod roots;

pub use bessel::bessel_i;
pub use chi2::{
    chi2_cdf, chi2_pdf, chi2nc_cdf, chi2nc_pdf, chi2nc_pdf_bessel, chi2nc_pdf_dz, chi2nc_quantile, chi2nc_sf,
};
pub use gamma::{gamma, gamma_p, gamma_q, ln_gamma};
pub use normal::{norm_cdf, norm_pdf, norm_quantile, norm_sf};

pub(crate) use chi2::{chi2nc_cdf_unchecked, chi2nc_pdf_unchecked, chi2nc_quantile_unchecked};
pub(crate) use normal::{big_phi, big_phi_c, phi, phi_inv};

use crate::error::{Error, Result};

/// Smallest / largest probability handed to a quantile inversion.
pub const PROB_FLOOR: f64 = 1e-15;

/// Convergence controls for iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(Error::param("abs_tol", "must be positive and finite"));
        }
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::param("rel_tol", "must be positive and finite"));
        }
        if max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_iter,
        })
    }

    /// Defaults used by every quantile inversion.
    pub const fn quantile() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }

    /// Defaults for series truncation.
    pub const fn series() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-17,
            max_iter: 100_000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::quantile()
    }
}

/// Clamp a probability into `[PROB_FLOOR, 1 - PROB_FLOOR]`.
#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {x}")))
    }
}

pub(crate) fn check_open_unit(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}

/// `(e^{k t} - 1) / k`, continuous through `k = 0`.
#[inline]
pub fn expm1_ratio(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

/// Inverse of [`expm1_ratio`] in `t`: `ln(1 + k y) / k`.
#[inline]
pub fn ln1p_ratio(k: f64, y: f64) -> f64 {
    if k == 0.0 {
        y
    } else {
        (k * y).ln_1p() / k
    }
}
