//! Central and noncentral chi-square distributions.
//!
//! The noncentral law is evaluated as a Poisson mixture of central
//! chi-squares, `f(z; ν, λ) = Σ_j Pois(j; λ/2) f(z; ν + 2j)`. Summation starts
//! at the largest term and walks outwards in both directions using exact term
//! ratios, stopping once the remaining terms are negligible. The Bessel form is
//! kept alongside as an independent cross-check.

use std::f64::consts::LN_2;

use super::bessel::bessel_i;
use super::gamma::{gamma_pq, ln_gamma};
use super::roots::invert_increasing;
use super::{check_open_unit, clamp_prob, phi_inv, Tolerance};
use crate::error::{Error, Result};

const TRUNC: f64 = 1e-17;
const MAX_TERMS: usize = 1_000_000;

fn check_shape(z: f64, nu: f64, lambda: f64) -> Result<()> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::domain(format!("chi-square argument must be >= 0, got {z}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain(format!("degrees of freedom must be positive, got {nu}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("noncentrality must be >= 0, got {lambda}")));
    }
    Ok(())
}

fn ln_central_pdf(z: f64, k: f64) -> f64 {
    (0.5 * k - 1.0) * z.ln() - 0.5 * z - 0.5 * k * LN_2 - ln_gamma(0.5 * k)
}

fn central_pdf_at_zero(k: f64) -> f64 {
    if k < 2.0 {
        f64::INFINITY
    } else if k == 2.0 {
        0.5
    } else {
        0.0
    }
}

/// Central chi-square density with `k` degrees of freedom.
pub fn chi2_pdf(z: f64, k: f64) -> Result<f64> {
    check_shape(z, k, 0.0)?;
    Ok(if z == 0.0 {
        central_pdf_at_zero(k)
    } else {
        ln_central_pdf(z, k).exp()
    })
}

/// Central chi-square distribution function.
pub fn chi2_cdf(z: f64, k: f64) -> Result<f64> {
    check_shape(z, k, 0.0)?;
    gamma_pq(0.5 * k, 0.5 * z).map(|(p, _)| p)
}

/// Density and its `z`-derivative, unchecked.
fn chi2nc_pdf_and_dz(z: f64, nu: f64, lambda: f64) -> (f64, f64) {
    if z == 0.0 {
        let f0 = if lambda == 0.0 {
            central_pdf_at_zero(nu)
        } else if nu < 2.0 {
            f64::INFINITY
        } else if nu == 2.0 {
            0.5 * (-0.5 * lambda).exp()
        } else {
            0.0
        };
        return (f0, f64::NAN);
    }
    if z == f64::INFINITY {
        return (0.0, 0.0);
    }
    let h = 0.5 * nu;
    if lambda == 0.0 {
        let f = ln_central_pdf(z, nu).exp();
        return (f, f * ((h - 1.0) / z - 0.5));
    }
    let half_lambda = 0.5 * lambda;
    // ratio(j) = term_{j+1} / term_j
    let ratio = |j: f64| lambda * z / (4.0 * (j + 1.0) * (h + j));
    let b = h + 1.0;
    let disc = b * b - 4.0 * (h - 0.25 * lambda * z);
    let mut j = (0.5 * (-b + disc.max(0.0).sqrt())).floor().max(0.0);
    while ratio(j) > 1.0 {
        j += 1.0;
    }
    while j > 0.0 && ratio(j - 1.0) < 1.0 {
        j -= 1.0;
    }
    let ln_peak = -half_lambda + j * half_lambda.ln() - ln_gamma(j + 1.0) + ln_central_pdf(z, nu + 2.0 * j);
    let slope = |jj: f64| (h + jj - 1.0) / z - 0.5;

    let mut sum = 1.0;
    let mut dsum = slope(j);
    let mut term = 1.0;
    let mut k = j;
    for _ in 0..MAX_TERMS {
        term *= ratio(k);
        k += 1.0;
        sum += term;
        dsum += term * slope(k);
        if term < TRUNC * sum {
            break;
        }
    }
    term = 1.0;
    k = j;
    while k > 0.0 {
        term /= ratio(k - 1.0);
        k -= 1.0;
        sum += term;
        dsum += term * slope(k);
        if term < TRUNC * sum {
            break;
        }
    }
    let scale = ln_peak.exp();
    (scale * sum, scale * dsum)
}

pub(crate) fn chi2nc_pdf_unchecked(z: f64, nu: f64, lambda: f64) -> f64 {
    chi2nc_pdf_and_dz(z, nu, lambda).0
}

/// Lower and upper tail probabilities `(F, 1 - F)`, each without cancellation.
pub(crate) fn chi2nc_cdf_unchecked(z: f64, nu: f64, lambda: f64) -> (f64, f64) {
    if z <= 0.0 {
        return (0.0, 1.0);
    }
    if z == f64::INFINITY {
        return (1.0, 0.0);
    }
    let h = 0.5 * nu;
    let x = 0.5 * z;
    if lambda == 0.0 {
        return gamma_pq(h, x).expect("validated arguments");
    }
    let half_lambda = 0.5 * lambda;
    let m = half_lambda.floor();
    let w_m = (-half_lambda + m * half_lambda.ln() - ln_gamma(m + 1.0)).exp();
    let (p_m, q_m) = gamma_pq(h + m, x).expect("validated arguments");
    // d(a) = x^a e^{-x} / Γ(a + 1); P(a+1) = P(a) - d(a), Q(a+1) = Q(a) + d(a)
    let d_m = ((h + m) * x.ln() - x - ln_gamma(h + m + 1.0)).exp();

    let mut lower = w_m * p_m;
    let mut upper = w_m * q_m;

    // Upward.
    let (mut w, mut p, mut q, mut d, mut j) = (w_m, p_m, q_m, d_m, m);
    for _ in 0..MAX_TERMS {
        p = (p - d).max(0.0);
        q = (q + d).min(1.0);
        d *= x / (h + j + 1.0);
        w *= half_lambda / (j + 1.0);
        j += 1.0;
        lower += w * p;
        upper += w * q;
        if w <= TRUNC * lower.min(upper).max(1e-300) {
            break;
        }
    }
    // Downward.
    let (mut w, mut p, mut q, mut d, mut j) = (w_m, p_m, q_m, d_m, m);
    while j > 0.0 {
        // d(a - 1) = d(a) (a) / x with a = h + j
        d *= (h + j) / x;
        p = (p + d).min(1.0);
        q = (q - d).max(0.0);
        w *= j / half_lambda;
        j -= 1.0;
        lower += w * p;
        upper += w * q;
        if w <= TRUNC * lower.min(upper).max(1e-300) {
            break;
        }
    }
    (lower.min(1.0), upper.min(1.0))
}

pub(crate) fn chi2nc_quantile_unchecked(p: f64, nu: f64, lambda: f64) -> Result<f64> {
    let p = clamp_prob(p);
    let mean = nu + lambda;
    let sd = (2.0 * (nu + 2.0 * lambda)).sqrt();
    let guess = (mean + sd * phi_inv(p)).max(1e-3 * mean);
    let tol = Tolerance::quantile();
    if p <= 0.5 {
        invert_increasing(
            |z| {
                (
                    chi2nc_cdf_unchecked(z, nu, lambda).0,
                    Some(chi2nc_pdf_unchecked(z, nu, lambda)),
                )
            },
            p,
            guess,
            0.25 * sd,
            0.0,
            f64::INFINITY,
            &tol,
        )
    } else {
        invert_increasing(
            |z| {
                (
                    -chi2nc_cdf_unchecked(z, nu, lambda).1,
                    Some(chi2nc_pdf_unchecked(z, nu, lambda)),
                )
            },
            -(1.0 - p),
            guess,
            0.25 * sd,
            0.0,
            f64::INFINITY,
            &tol,
        )
    }
}

/// Noncentral chi-square density (Poisson-mixture evaluation).
///
/// Returns `+∞` at `z = 0` when `ν < 2`, where the density is singular.
pub fn chi2nc_pdf(z: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_shape(z, nu, lambda)?;
    Ok(chi2nc_pdf_unchecked(z, nu, lambda))
}

/// `∂f/∂z` of the noncentral chi-square density, `z > 0`.
pub fn chi2nc_pdf_dz(z: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_shape(z, nu, lambda)?;
    if z == 0.0 {
        return Err(Error::domain("density derivative is undefined at z = 0"));
    }
    Ok(chi2nc_pdf_and_dz(z, nu, lambda).1)
}

/// Noncentral chi-square distribution function.
pub fn chi2nc_cdf(z: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_shape(z, nu, lambda)?;
    let (lo, up) = chi2nc_cdf_unchecked(z, nu, lambda);
    Ok(if lo < 0.5 { lo } else { 1.0 - up })
}

/// Noncentral chi-square upper tail `1 - F`.
pub fn chi2nc_sf(z: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_shape(z, nu, lambda)?;
    let (lo, up) = chi2nc_cdf_unchecked(z, nu, lambda);
    Ok(if up < 0.5 { up } else { 1.0 - lo })
}

/// Noncentral chi-square quantile; `p` is clamped to `[1e-15, 1 - 1e-15]`.
pub fn chi2nc_quantile(p: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    check_shape(0.0, nu, lambda)?;
    chi2nc_quantile_unchecked(p, nu, lambda)
}

/// Bessel form `½ e^{-(z+λ)/2} (z/λ)^{(ν-2)/4} I_{(ν-2)/2}(√(λz))`.
///
/// Only meant for moderate arguments; the mixture form is the production path.
pub fn chi2nc_pdf_bessel(z: f64, nu: f64, lambda: f64) -> Result<f64> {
    check_shape(z, nu, lambda)?;
    if lambda == 0.0 || z == 0.0 {
        return chi2nc_pdf(z, nu, lambda);
    }
    let order = 0.5 * (nu - 2.0);
    let i = bessel_i(order, (lambda * z).sqrt())?;
    Ok(0.5 * (-0.5 * (z + lambda)).exp() * (z / lambda).powf(0.5 * order) * i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::quad::{integrate, QuadOptions};

    #[test]
    fn central_special_cases() {
        assert!((chi2nc_pdf(2.0, 2.0, 0.0).unwrap() - 0.183_939_720_585_721_17).abs() < 1e-16);
        assert_eq!(chi2nc_pdf(0.0, 1.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(chi2nc_cdf(0.0, 3.0, 2.0).unwrap(), 0.0);
        for &z in &[0.1_f64, 1.0, 2.5, 7.0, 30.0] {
            let exact = -(-0.5 * z).exp_m1();
            assert!((chi2nc_cdf(z, 2.0, 0.0).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(chi2nc_pdf(-1.0, 2.0, 1.0).is_err());
        assert!(chi2nc_pdf(1.0, 0.0, 1.0).is_err());
        assert!(chi2nc_pdf(1.0, 2.0, -1.0).is_err());
        assert!(chi2nc_quantile(0.0, 2.0, 1.0).is_err());
        assert!(chi2nc_quantile(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn mean_is_nu_plus_lambda() {
        let r = integrate(
            |z| z * chi2nc_pdf_unchecked(z, 3.0, 5.0),
            0.0,
            f64::INFINITY,
            &QuadOptions::tol(1e-11),
        )
        .unwrap();
        assert!((r.value - 8.0).abs() < 1e-6);
    }

    #[test]
    fn inverse_pair() {
        let p = chi2nc_cdf(3.7, 4.0, 2.0).unwrap();
        let z = chi2nc_quantile(p, 4.0, 2.0).unwrap();
        assert!((z - 3.7).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &(z, nu, lambda) in &[(1.3, 1.0, 4.0), (5.0, 4.0, 10.0), (600.0, 625.0, 30.0)] {
            let h = 1e-5 * z;
            let fd = (chi2nc_pdf(z + h, nu, lambda).unwrap() - chi2nc_pdf(z - h, nu, lambda).unwrap()) / (2.0 * h);
            let an = chi2nc_pdf_dz(z, nu, lambda).unwrap();
            assert!(
                (fd - an).abs() < 1e-7 * an.abs().max(1e-3),
                "({z}, {nu}, {lambda}): {fd} vs {an}"
            );
        }
    }

    #[test]
    fn tails_are_complementary() {
        for &(z, nu, lambda) in &[(0.5, 1.0, 0.3), (12.0, 4.0, 6.0), (900.0, 625.0, 11000.0)] {
            let (lo, up) = chi2nc_cdf_unchecked(z, nu, lambda);
            assert!((lo + up - 1.0).abs() < 1e-13, "({z}, {nu}, {lambda}): {lo} + {up}");
        }
    }
}
