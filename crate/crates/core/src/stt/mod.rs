//! Space-time transformations `τ = φ(t)`, `y = ψ(t, x)` of diffusions.
//!
//! A transform carries its time map with inverse, the spatial map, its
//! Jacobian `J = ∂ψ/∂x` and the ordered list of pieces on which `ψ(t, ·)` is
//! strictly monotone. Each piece brings its own closed-form inverse, so
//! preimages never need a root finder.

mod chains;
mod nonmonotone;
mod push;
mod wiener;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::DiffusionSpec;

pub use chains::{builtin_chain, builtin_target, Chain};
pub use nonmonotone::{nonmonotone_copula, NonmonotoneCopula, PushedMarginal};
pub use push::{push_model, push_transition, PushedKernel};
pub use wiener::{
    search_constant_coefficients, wiener_transformability_check, ConstantFit, TransformabilityReport, WienerGrid,
    WIENER_TOL,
};

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Maximal interval on which `ψ(t, ·)` is strictly monotone.
#[derive(Clone)]
pub struct Piece {
    pub lower: f64,
    pub upper: f64,
    pub increasing: bool,
    inverse: SpaceFn,
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Piece")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("increasing", &self.increasing)
            .finish_non_exhaustive()
    }
}

impl Piece {
    pub fn new(
        lower: f64,
        upper: f64,
        increasing: bool,
        inverse: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            lower,
            upper,
            increasing,
            inverse: Arc::new(inverse),
        }
    }

    /// `x` in this piece with `ψ(t, x) = y`.
    pub fn inverse(&self, t: f64, y: f64) -> f64 {
        (self.inverse)(t, y)
    }
}

/// `(τ, y) = (φ(t), ψ(t, x))`.
#[derive(Clone)]
pub struct SpaceTimeTransform {
    name: String,
    phi: TimeFn,
    phi_inv: TimeFn,
    phi_dot: TimeFn,
    psi: SpaceFn,
    jacobian: SpaceFn,
    pieces: Vec<Piece>,
}

impl fmt::Debug for SpaceTimeTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceTimeTransform")
            .field("name", &self.name)
            .field("pieces", &self.pieces)
            .finish_non_exhaustive()
    }
}

/// Time-map ingredients: `φ`, `φ⁻¹` and `φ'`.
pub struct TimeMap {
    pub forward: TimeFn,
    pub inverse: TimeFn,
    pub derivative: TimeFn,
}

impl TimeMap {
    pub fn identity() -> Self {
        Self {
            forward: Arc::new(|t| t),
            inverse: Arc::new(|t| t),
            derivative: Arc::new(|_| 1.0),
        }
    }
}

impl SpaceTimeTransform {
    pub fn new(
        name: impl Into<String>,
        time: TimeMap,
        psi: SpaceFn,
        jacobian: SpaceFn,
        pieces: Vec<Piece>,
    ) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::domain("a transform needs at least one monotone piece"));
        }
        for w in pieces.windows(2) {
            if w[0].upper > w[1].lower {
                return Err(Error::domain("pieces must be ordered and non-overlapping"));
            }
        }
        if pieces.iter().any(|p| !(p.lower < p.upper)) {
            return Err(Error::domain("every piece needs lower < upper"));
        }
        Ok(Self {
            name: name.into(),
            phi: time.forward,
            phi_inv: time.inverse,
            phi_dot: time.derivative,
            psi,
            jacobian,
            pieces,
        })
    }

    pub fn identity() -> Self {
        Self::new(
            "identity",
            TimeMap::identity(),
            Arc::new(|_, x| x),
            Arc::new(|_, _| 1.0),
            vec![Piece::new(f64::NEG_INFINITY, f64::INFINITY, true, |_, y| y)],
        )
        .expect("valid identity")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phi(&self, t: f64) -> f64 {
        (self.phi)(t)
    }

    /// `φ'(t)`.
    pub fn phi_dot(&self, t: f64) -> f64 {
        (self.phi_dot)(t)
    }

    /// `φ⁻¹(τ)`, or an error when `τ` is outside the range of `φ`.
    pub fn phi_inv(&self, tau: f64) -> Result<f64> {
        let t = (self.phi_inv)(tau);
        if t.is_finite() {
            Ok(t)
        } else {
            Err(Error::TimeMap(format!(
                "τ = {tau} is outside the range of φ in {}",
                self.name
            )))
        }
    }

    pub fn psi(&self, t: f64, x: f64) -> f64 {
        (self.psi)(t, x)
    }

    pub fn jacobian(&self, t: f64, x: f64) -> f64 {
        (self.jacobian)(t, x)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_monotone(&self) -> bool {
        self.pieces.len() == 1
    }

    /// Closed range of `ψ(t, ·)` over a piece.
    pub fn image(&self, piece: &Piece, t: f64) -> (f64, f64) {
        let a = self.psi(t, piece.lower);
        let b = self.psi(t, piece.upper);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Every `x` with `ψ(t, x) = y`, one per piece whose image contains `y`.
    pub fn preimages(&self, t: f64, y: f64) -> Vec<f64> {
        self.pieces
            .iter()
            .filter(|p| {
                let (lo, hi) = self.image(p, t);
                y >= lo && y <= hi
            })
            .map(|p| p.inverse(t, y))
            .collect()
    }

    /// Keep only the part of the transform acting on `[lower, upper]`.
    pub fn restrict(&self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::domain(format!("empty restriction [{lower}, {upper}]")));
        }
        let pieces: Vec<Piece> = self
            .pieces
            .iter()
            .filter(|p| p.upper > lower && p.lower < upper)
            .map(|p| Piece {
                lower: p.lower.max(lower),
                upper: p.upper.min(upper),
                ..p.clone()
            })
            .collect();
        if pieces.is_empty() {
            return Err(Error::domain(format!(
                "{} has no piece meeting [{lower}, {upper}]",
                self.name
            )));
        }
        Ok(Self { pieces, ..self.clone() })
    }

    /// `next ∘ self` for monotone transforms.
    pub fn compose(&self, next: &SpaceTimeTransform) -> Result<Self> {
        if !self.is_monotone() {
            return Err(Error::NotMonotone {
                pieces: self.pieces.len(),
            });
        }
        if !next.is_monotone() {
            return Err(Error::NotMonotone {
                pieces: next.pieces.len(),
            });
        }
        let a = Arc::new(self.clone());
        let b = Arc::new(next.clone());
        let (pa, pb) = (a.pieces[0].clone(), b.pieces[0].clone());
        let time = {
            let (a1, b1, a2, b2, a3, b3) = (a.clone(), b.clone(), a.clone(), b.clone(), a.clone(), b.clone());
            TimeMap {
                forward: Arc::new(move |t| b1.phi(a1.phi(t))),
                inverse: Arc::new(move |tau| (a2.phi_inv)((b2.phi_inv)(tau))),
                derivative: Arc::new(move |t| b3.phi_dot(a3.phi(t)) * a3.phi_dot(t)),
            }
        };
        let (a1, b1, a2, b2, a3) = (a.clone(), b.clone(), a.clone(), b.clone(), a.clone());
        Self::new(
            format!("{} ∘ {}", next.name, self.name),
            time,
            Arc::new(move |t, x| b1.psi(a1.phi(t), a1.psi(t, x))),
            Arc::new(move |t, x| b2.jacobian(a2.phi(t), a2.psi(t, x)) * a2.jacobian(t, x)),
            vec![Piece::new(
                pa.lower,
                pa.upper,
                pa.increasing == pb.increasing,
                move |t, y| pa.inverse(t, pb.inverse(a3.phi(t), y)),
            )],
        )
    }

    /// Drift and diffusion coefficient of `Y_τ = ψ(t, X_t)` by Itô's formula.
    ///
    /// `ψ_t` and `ψ_xx` use central differences; the Jacobian is analytic.
    pub fn ito_coefficients(&self, spec: &DiffusionSpec, t: f64, x: f64) -> (f64, f64) {
        let ht = 1e-5 * t.abs().max(1.0);
        let hx = 1e-5 * x.abs().max(1e-2);
        let psi_t = (self.psi(t + ht, x) - self.psi(t - ht, x)) / (2.0 * ht);
        let psi_xx = (self.jacobian(t, x + hx) - self.jacobian(t, x - hx)) / (2.0 * hx);
        let j = self.jacobian(t, x);
        let (mu, sigma) = (spec.drift(x, t), spec.diffusion(x, t));
        let pd = self.phi_dot(t);
        let drift = (psi_t + mu * j + 0.5 * sigma * sigma * psi_xx) / pd;
        (drift, sigma * j.abs() / pd.sqrt())
    }
}
