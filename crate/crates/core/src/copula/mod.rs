//! Copula surfaces of diffusions.
//!
//! A [`CopulaSurface`] wraps a [`CopulaFamily`] at a fixed time pair. Families
//! work in "coordinates": each probability `u` or `v` is first mapped to
//! whatever the density formula needs (a quantile, a quantile plus a marginal
//! density, ...). Grid evaluation computes those coordinates once per row and
//! column instead of once per cell.

mod closed;
mod grid;
mod transition;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::Params;
use crate::special_fn::quad::{integrate_breaks, QuadOptions};
use crate::special_fn::{big_phi, phi, phi_inv};

pub use closed::{cir_closed_form, gaussian_closed_form, ou_closed_form, ou_time_map, rbm_closed_form};
pub use grid::CopulaGrid;
pub use transition::from_transition;

/// Lower clamp applied to `u` and `v` before density evaluation.
pub const EDGE: f64 = 1e-12;

/// Precomputed per-coordinate data, family specific.
pub type Coord = Vec<f64>;

/// How a surface was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    FromTransition,
    Nonmonotone,
    TimeChange,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::FromTransition => "from_transition",
            Provenance::Nonmonotone => "nonmonotone",
            Provenance::TimeChange => "time_change",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Provenance::ClosedForm,
            Provenance::FromTransition,
            Provenance::Nonmonotone,
            Provenance::TimeChange,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown provenance `{s}`")))
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bivariate copula density in coordinate form.
pub trait CopulaFamily: Send + Sync {
    fn coord_u(&self, u: f64) -> Result<Coord>;

    fn coord_v(&self, v: f64) -> Result<Coord>;

    fn density_at(&self, a: &Coord, b: &Coord) -> f64;

    /// Exact `C(v | u)` when the family has one.
    fn conditional_at(&self, _a: &Coord, _b: &Coord) -> Option<f64> {
        None
    }
}

/// Copula density `c_{s,t}` of `(X_s, X_t)` with its conditional and cdf.
#[derive(Clone)]
pub struct CopulaSurface {
    family: Arc<dyn CopulaFamily>,
    s: f64,
    t: f64,
    provenance: Provenance,
    params: Params,
    label: String,
}

impl fmt::Debug for CopulaSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CopulaSurface")
            .field("label", &self.label)
            .field("s", &self.s)
            .field("t", &self.t)
            .field("provenance", &self.provenance)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

fn check_unit(name: &str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p.clamp(EDGE, 1.0 - EDGE))
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Quadrature runs over `w = Φ⁻¹(z)` in `[-W_MAX, W_MAX]`; the mass outside is
/// below `Φ(-W_MAX) ≈ 10⁻¹⁷` times the density at the clamped edge.
const W_MAX: f64 = 8.5;

/// Uniform partition of `[-W_MAX, upper]` with step ½ plus `center`, where
/// the mass of positively dependent copulas concentrates.
fn w_partition(center: f64, upper: f64) -> Vec<f64> {
    let upper = upper.min(W_MAX);
    if upper <= -W_MAX {
        return vec![-W_MAX, -W_MAX];
    }
    let steps = ((upper + W_MAX) / 0.5).ceil() as usize;
    let mut pts: Vec<f64> = (0..steps).map(|i| -W_MAX + 0.5 * i as f64).collect();
    pts.push(upper);
    if center > -W_MAX && center < upper {
        pts.push(center);
    }
    pts.sort_by(f64::total_cmp);
    pts
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_intervals: 2000,
    }
}

impl CopulaSurface {
    pub fn new(
        family: Arc<dyn CopulaFamily>,
        s: f64,
        t: f64,
        provenance: Provenance,
        params: Params,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(s.is_finite() && t.is_finite() && s < t) {
            return Err(Error::domain(format!("need s < t, got s = {s}, t = {t}")));
        }
        Ok(Self {
            family,
            s,
            t,
            provenance,
            params,
            label: label.into(),
        })
    }

    pub fn times(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> &Arc<dyn CopulaFamily> {
        &self.family
    }

    /// The same density reported at a different (time-changed) pair of times.
    pub fn at_times(&self, s: f64, t: f64) -> Result<Self> {
        let mut out = Self::new(
            Arc::clone(&self.family),
            s,
            t,
            Provenance::TimeChange,
            self.params.clone(),
            self.label.clone(),
        )?;
        out.label = format!("{} (time-changed)", self.label);
        Ok(out)
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        let u = check_unit("u", u)?;
        let v = check_unit("v", v)?;
        let a = self.family.coord_u(u)?;
        let b = self.family.coord_v(v)?;
        Ok(self.family.density_at(&a, &b))
    }

    /// `C(v | u) = ∫₀^v c(u, z) dz`.
    pub fn conditional(&self, u: f64, v: f64) -> Result<f64> {
        let uc = check_unit("u", u)?;
        check_unit("v", v)?;
        if v == 0.0 {
            return Ok(0.0);
        }
        if v == 1.0 {
            return Ok(1.0);
        }
        let a = self.family.coord_u(uc)?;
        let b = self.family.coord_v(v)?;
        if let Some(c) = self.family.conditional_at(&a, &b) {
            return Ok(c.clamp(0.0, 1.0));
        }
        self.conditional_by_quadrature_at(uc, &a, v)
    }

    /// `C(v | u)` by quadrature of the density, ignoring any exact form.
    pub fn conditional_by_quadrature(&self, u: f64, v: f64) -> Result<f64> {
        let uc = check_unit("u", u)?;
        check_unit("v", v)?;
        if v == 0.0 {
            return Ok(0.0);
        }
        let a = self.family.coord_u(uc)?;
        self.conditional_by_quadrature_at(uc, &a, v)
    }

    fn conditional_by_quadrature_at(&self, u: f64, a: &Coord, v: f64) -> Result<f64> {
        // z = Φ(w) spreads the corner singularities over the w axis.
        let upper = phi_inv(v.min(1.0 - EDGE));
        let f = |w: f64| {
            let z = big_phi(w).clamp(EDGE, 1.0 - EDGE);
            match self.family.coord_v(z) {
                Ok(b) => self.family.density_at(a, &b) * phi(w),
                Err(_) => f64::NAN,
            }
        };
        let r = integrate_breaks(f, &w_partition(phi_inv(u), upper), &quad_opts())?;
        if !r.value.is_finite() {
            return Err(Error::Convergence {
                what: "conditional quadrature",
                achieved: r.error,
                iterations: 0,
            });
        }
        Ok(r.value.clamp(0.0, 1.0))
    }

    /// `∫₀¹ c(u, v) du` for a fixed `v`; equals 1 for a valid copula.
    pub fn margin_u(&self, v: f64) -> Result<f64> {
        let b = self.family.coord_v(check_unit("v", v)?)?;
        let f = |w: f64| {
            let z = big_phi(w).clamp(EDGE, 1.0 - EDGE);
            match self.family.coord_u(z) {
                Ok(a) => self.family.density_at(&a, &b) * phi(w),
                Err(_) => f64::NAN,
            }
        };
        Ok(integrate_breaks(f, &w_partition(phi_inv(v), W_MAX), &quad_opts())?.value)
    }

    /// `∫₀¹ c(u, v) dv` for a fixed `u`; equals 1 for a valid copula.
    pub fn margin_v(&self, u: f64) -> Result<f64> {
        let a = self.family.coord_u(check_unit("u", u)?)?;
        self.conditional_by_quadrature_at(u, &a, 1.0)
    }

    /// `C(u, v) = ∫₀^u C(v | z) dz`.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        let b = if v < 1.0 { Some(self.family.coord_v(v)?) } else { None };
        let upper = phi_inv(u.min(1.0 - EDGE));
        let f = |w: f64| {
            let z = big_phi(w).clamp(EDGE, 1.0 - EDGE);
            let inner = match (&b, self.family.coord_u(z)) {
                (None, _) => Ok(1.0),
                (Some(b), Ok(a)) => match self.family.conditional_at(&a, b) {
                    Some(c) => Ok(c),
                    None => self.conditional_by_quadrature_at(z, &a, v),
                },
                (_, Err(e)) => Err(e),
            };
            inner.map(|c| c * phi(w)).unwrap_or(f64::NAN)
        };
        let r = integrate_breaks(f, &w_partition(phi_inv(v.min(1.0 - EDGE)), upper), &quad_opts())?;
        if !r.value.is_finite() {
            return Err(Error::Convergence {
                what: "copula cdf quadrature",
                achieved: r.error,
                iterations: 0,
            });
        }
        Ok(r.value.clamp(0.0, u.min(v)))
    }

    /// Densities at cell midpoints `((j + ½)/n, (i + ½)/n)`; row `i` is `v`.
    pub fn grid_eval(&self, n: usize) -> Result<CopulaGrid> {
        CopulaGrid::evaluate(self, n)
    }
}
