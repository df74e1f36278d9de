//! Closed-form copula families: Gaussian (Brownian), OU, reflected BM and CIR.

use std::sync::Arc;

use super::{Coord, CopulaFamily, CopulaSurface, Provenance};
use crate::error::{Error, Result};
use crate::models::Params;
use crate::special_fn::{
    big_phi, big_phi_c, chi2nc_cdf_unchecked, chi2nc_pdf_unchecked, chi2nc_quantile_unchecked, expm1_ratio, phi_inv,
};

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) {
        return Err(Error::domain("times must be finite"));
    }
    if !(s > 0.0 && s < t) {
        return Err(Error::domain(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// Copula of Brownian motion at variance times `(s, t)`.
#[derive(Debug, Clone, Copy)]
struct Gaussian {
    rs: f64,
    rt: f64,
    rd: f64,
}

impl Gaussian {
    fn new(s: f64, t: f64) -> Self {
        Self {
            rs: s.sqrt(),
            rt: t.sqrt(),
            rd: (t - s).sqrt(),
        }
    }

    fn z(&self, a: f64, b: f64) -> f64 {
        (self.rt * b - self.rs * a) / self.rd
    }
}

impl CopulaFamily for Gaussian {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(vec![phi_inv(u), 0.0])
    }

    fn coord_v(&self, v: f64) -> Result<Coord> {
        Ok(vec![phi_inv(v), 0.0])
    }

    fn density_at(&self, a: &Coord, b: &Coord) -> f64 {
        let z = self.z(a[0], b[0]);
        self.rt / self.rd * (0.5 * (b[0] * b[0] - z * z)).exp()
    }

    fn conditional_at(&self, a: &Coord, b: &Coord) -> Option<f64> {
        Some(big_phi(self.z(a[0], b[0])))
    }
}

/// Brownian copula `√(t/(t−s)) φ((√t Φ⁻¹(v) − √s Φ⁻¹(u))/√(t−s)) / φ(Φ⁻¹(v))`.
///
/// Shared by every process that is a monotone spatial transform of Brownian
/// motion without a time change (drifted BM, GBM).
pub fn gaussian_closed_form(s: f64, t: f64) -> Result<CopulaSurface> {
    check_times(s, t)?;
    CopulaSurface::new(
        Arc::new(Gaussian::new(s, t)),
        s,
        t,
        Provenance::ClosedForm,
        Params::new(),
        "gaussian",
    )
}

/// OU time change `φ(t) = (e^{2αt} − 1)/(2α)`.
pub fn ou_time_map(alpha: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |t| expm1_ratio(2.0 * alpha, t)
}

/// OU copula: the Brownian copula evaluated at `(φ(s), φ(t))`.
///
/// Depends on `α` only; drift level and volatility drop out.
pub fn ou_closed_form(alpha: f64, s: f64, t: f64) -> Result<CopulaSurface> {
    if !alpha.is_finite() {
        return Err(Error::param("alpha", "must be finite"));
    }
    check_times(s, t)?;
    let phi = ou_time_map(alpha);
    let (ps, pt) = (phi(s), phi(t));
    if !(ps.is_finite() && pt.is_finite() && ps < pt) {
        return Err(Error::domain(format!("time change overflows at t = {t}")));
    }
    CopulaSurface::new(
        Arc::new(Gaussian::new(ps, pt)),
        s,
        t,
        Provenance::ClosedForm,
        Params::new().with("alpha", alpha),
        "ou",
    )
}

/// Copula of `|B|` started at the origin.
#[derive(Debug, Clone, Copy)]
struct Reflected {
    g: Gaussian,
}

impl Reflected {
    /// `Φ⁻¹((1 + p)/2)` evaluated from the small side.
    fn folded_quantile(p: f64) -> f64 {
        -phi_inv(0.5 * (1.0 - p))
    }

    fn z_pair(&self, a: f64, b: f64) -> (f64, f64) {
        let g = &self.g;
        ((g.rt * b - g.rs * a) / g.rd, (g.rt * b + g.rs * a) / g.rd)
    }
}

impl CopulaFamily for Reflected {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(vec![Self::folded_quantile(u), 0.0])
    }

    fn coord_v(&self, v: f64) -> Result<Coord> {
        Ok(vec![Self::folded_quantile(v), 0.0])
    }

    fn density_at(&self, a: &Coord, b: &Coord) -> f64 {
        let (z1, z2) = self.z_pair(a[0], b[0]);
        let b2 = b[0] * b[0];
        0.5 * self.g.rt / self.g.rd * ((0.5 * (b2 - z1 * z1)).exp() + (0.5 * (b2 - z2 * z2)).exp())
    }

    fn conditional_at(&self, a: &Coord, b: &Coord) -> Option<f64> {
        let (z1, z2) = self.z_pair(a[0], b[0]);
        Some(if z1 > 0.0 {
            1.0 - big_phi_c(z1) - big_phi_c(z2)
        } else {
            (big_phi(z1) - big_phi_c(z2)).max(0.0)
        })
    }
}

/// Copula of reflected Brownian motion started at 0: a two-term Gaussian mixture
/// in the folded quantiles `Φ⁻¹((1 + u)/2)`, `Φ⁻¹((1 + v)/2)`.
pub fn rbm_closed_form(s: f64, t: f64) -> Result<CopulaSurface> {
    check_times(s, t)?;
    CopulaSurface::new(
        Arc::new(Reflected { g: Gaussian::new(s, t) }),
        s,
        t,
        Provenance::ClosedForm,
        Params::new(),
        "rbm",
    )
}

/// CIR copula in canonical units (`β = 1`, `σ² = 4/γ`).
#[derive(Debug, Clone, Copy)]
struct Cir {
    gamma: f64,
    lambda_s: f64,
    lambda_t: f64,
    /// `c_Δ / c_t` and `c_Δ e^{−αΔ} / c_s`.
    k_t: f64,
    k_s: f64,
}

impl CopulaFamily for Cir {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(vec![chi2nc_quantile_unchecked(u, self.gamma, self.lambda_s)?, 0.0])
    }

    fn coord_v(&self, v: f64) -> Result<Coord> {
        let q = chi2nc_quantile_unchecked(v, self.gamma, self.lambda_t)?;
        Ok(vec![q, chi2nc_pdf_unchecked(q, self.gamma, self.lambda_t)])
    }

    fn density_at(&self, a: &Coord, b: &Coord) -> f64 {
        let ncp = self.k_s * a[0];
        self.k_t * chi2nc_pdf_unchecked(self.k_t * b[0], self.gamma, ncp) / b[1]
    }

    fn conditional_at(&self, a: &Coord, b: &Coord) -> Option<f64> {
        let (lo, up) = chi2nc_cdf_unchecked(self.k_t * b[0], self.gamma, self.k_s * a[0]);
        Some(if lo < 0.5 { lo } else { 1.0 - up })
    }
}

/// CIR copula from the noncentral chi-square transition law.
///
/// The surface depends on `α`, `γ = 4β/σ²` and the starting point measured in
/// units of `β` (pass `x0/β` as `x0`). Marginal quantiles at `s` and `t` use the
/// noncentralities implied by `x0`; `x0 = 0` gives central marginals.
pub fn cir_closed_form(alpha: f64, gamma: f64, x0: f64, s: f64, t: f64) -> Result<CopulaSurface> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::param("x0", format!("must be >= 0, got {x0}")));
    }
    check_times(s, t)?;
    // g(r) = (1 − e^{−αr})/α, and c_r = 2/(σ² g(r)) so c_a/c_b = g(b)/g(a).
    let g = |r: f64| expm1_ratio(-alpha, r);
    let dt = t - s;
    let (gs, gt, gd) = (g(s), g(t), g(dt));
    let family = Cir {
        gamma,
        lambda_s: gamma * (-alpha * s).exp() * x0 / gs,
        lambda_t: gamma * (-alpha * t).exp() * x0 / gt,
        k_t: gt / gd,
        k_s: gs / gd * (-alpha * dt).exp(),
    };
    CopulaSurface::new(
        Arc::new(family),
        s,
        t,
        Provenance::ClosedForm,
        Params::new().with("alpha", alpha).with("gamma", gamma).with("x0", x0),
        "cir",
    )
}
