//! Test whether a diffusion can be mapped onto Brownian motion.
//!
//! The criterion compares, on an `(x, t)` grid,
//! `μ/σ` against `σ_x/2 + ∫ σ_t/σ² dx + c1(t) ∫ dx/σ + c2(t)`,
//! with all integrals taken from a reference point `x_ref`.
//!
//! When it holds, `φ'(t) = exp(−2∫₀ᵗ c1)`, `K(t) = −∫₀ᵗ c2 √φ'` and
//! `ψ(t, x) = √φ'(t) ∫_{x_ref}^x dz/σ(z, t) + K(t)` send the diffusion to a
//! standard Brownian motion.

use std::sync::Arc;

use super::{Piece, SpaceTimeTransform, TimeFn, TimeMap};
use crate::error::{Error, Result};
use crate::models::DiffusionSpec;
use crate::special_fn::quad::{integrate, QuadOptions};
use crate::special_fn::roots::invert_increasing;
use crate::special_fn::Tolerance;

/// Pass threshold on the maximal residual.
pub const WIENER_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct WienerGrid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub x_ref: f64,
}

#[derive(Debug, Clone)]
pub struct TransformabilityReport {
    pub pass: bool,
    pub max_residual: f64,
    /// The constructive transform onto Brownian motion when the check passes.
    pub transform: Option<SpaceTimeTransform>,
}

/// Best constant pair found by [`search_constant_coefficients`].
#[derive(Debug, Clone, Copy)]
pub struct ConstantFit {
    pub c1: f64,
    pub c2: f64,
    pub max_residual: f64,
    pub pass: bool,
}

fn opts() -> QuadOptions {
    QuadOptions::tol(1e-13)
}

fn rel_step(x: f64) -> f64 {
    if x == 0.0 {
        1e-5
    } else {
        1e-5 * x.abs()
    }
}

/// `(μ/σ − σ_x/2 − ∫σ_t/σ², ∫dx/σ)` at one grid point.
fn split_terms(spec: &DiffusionSpec, x_ref: f64, x: f64, t: f64) -> Result<(f64, f64)> {
    let sigma = spec.diffusion(x, t);
    if !(sigma.is_finite() && sigma != 0.0) {
        return Err(Error::domain(format!(
            "diffusion coefficient vanishes at x = {x}, t = {t}"
        )));
    }
    let hx = rel_step(x);
    let sigma_x = (spec.diffusion(x + hx, t) - spec.diffusion(x - hx, t)) / (2.0 * hx);
    let ht = rel_step(t);
    let drift_integral = integrate(
        |z| {
            let sg = spec.diffusion(z, t);
            (spec.diffusion(z, t + ht) - spec.diffusion(z, t - ht)) / (2.0 * ht) / (sg * sg)
        },
        x_ref,
        x,
        &opts(),
    )?
    .value;
    let scale = integrate(|z| 1.0 / spec.diffusion(z, t), x_ref, x, &opts())?.value;
    Ok((spec.drift(x, t) / sigma - 0.5 * sigma_x - drift_integral, scale))
}

fn grid_terms(spec: &DiffusionSpec, grid: &WienerGrid) -> Result<Vec<(f64, f64, f64)>> {
    if grid.xs.is_empty() || grid.ts.is_empty() {
        return Err(Error::domain("empty transformability grid"));
    }
    let mut out = Vec::with_capacity(grid.xs.len() * grid.ts.len());
    for &t in &grid.ts {
        for &x in &grid.xs {
            let (a, b) = split_terms(spec, grid.x_ref, x, t)?;
            out.push((t, a, b));
        }
    }
    Ok(out)
}

/// Evaluate the criterion for user-supplied `c1(t)`, `c2(t)`.
pub fn wiener_transformability_check(
    spec: &DiffusionSpec,
    c1: TimeFn,
    c2: TimeFn,
    grid: &WienerGrid,
) -> Result<TransformabilityReport> {
    let terms = grid_terms(spec, grid)?;
    let max_residual = terms
        .iter()
        .map(|&(t, a, b)| (a - c1(t) * b - c2(t)).abs())
        .fold(0.0, f64::max);
    let pass = max_residual <= WIENER_TOL;
    let transform = if pass {
        Some(constructive_transform(spec, c1, c2, grid.x_ref)?)
    } else {
        None
    };
    Ok(TransformabilityReport {
        pass,
        max_residual,
        transform,
    })
}

/// Coarse search over constant `(c1, c2)` in `[lo, hi]²` with `steps` points per axis.
pub fn search_constant_coefficients(
    spec: &DiffusionSpec,
    grid: &WienerGrid,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<ConstantFit> {
    if steps < 2 || !(lo < hi) {
        return Err(Error::domain("search needs lo < hi and at least two steps"));
    }
    let terms = grid_terms(spec, grid)?;
    let h = (hi - lo) / (steps - 1) as f64;
    let mut best = ConstantFit {
        c1: f64::NAN,
        c2: f64::NAN,
        max_residual: f64::INFINITY,
        pass: false,
    };
    for i in 0..steps {
        let c1 = lo + h * i as f64;
        for j in 0..steps {
            let c2 = lo + h * j as f64;
            let r = terms
                .iter()
                .map(|&(_, a, b)| (a - c1 * b - c2).abs())
                .fold(0.0, f64::max);
            if r < best.max_residual {
                best = ConstantFit {
                    c1,
                    c2,
                    max_residual: r,
                    pass: r <= WIENER_TOL,
                };
            }
        }
    }
    Ok(best)
}

/// The transform built from `c1`, `c2`, with time measured from 0.
///
/// Both inverses are numerical, since `φ` and `ψ` are only known as integrals.
fn constructive_transform(spec: &DiffusionSpec, c1: TimeFn, c2: TimeFn, x_ref: f64) -> Result<SpaceTimeTransform> {
    let phi_dot: TimeFn = Arc::new(move |t: f64| {
        let i = integrate(|r| c1(r), 0.0, t, &opts())
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        (-2.0 * i).exp()
    });
    let pd = Arc::clone(&phi_dot);
    let phi: TimeFn = Arc::new(move |t: f64| {
        integrate(|r| pd(r), 0.0, t, &opts())
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    });
    let pf = Arc::clone(&phi);
    let pdi = Arc::clone(&phi_dot);
    let phi_inv: TimeFn = Arc::new(move |tau: f64| {
        invert_increasing(
            |t| (pf(t), Some(pdi(t))),
            tau,
            tau,
            1.0,
            0.0,
            f64::INFINITY,
            &Tolerance::quantile(),
        )
        .unwrap_or(f64::NAN)
    });
    let pd = Arc::clone(&phi_dot);
    let shift: TimeFn = Arc::new(move |t: f64| {
        -integrate(|r| c2(r) * pd(r).sqrt(), 0.0, t, &opts())
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    });

    let (sp, pd, sh) = (spec.clone(), Arc::clone(&phi_dot), Arc::clone(&shift));
    let psi = Arc::new(move |t: f64, x: f64| {
        // A divergent scale integral towards an infinite endpoint maps it to ±∞.
        let fallback = if x.is_infinite() { x } else { f64::NAN };
        let scale = integrate(|z| 1.0 / sp.diffusion(z, t), x_ref, x, &opts())
            .map(|r| r.value)
            .unwrap_or(fallback);
        pd(t).sqrt() * scale + sh(t)
    });
    let (sp, pd) = (spec.clone(), Arc::clone(&phi_dot));
    let jacobian = Arc::new(move |t: f64, x: f64| pd(t).sqrt() / sp.diffusion(x, t));
    let iv = spec.interval;
    let (ps, js) = (Arc::clone(&psi), Arc::clone(&jacobian));
    let inverse = move |t: f64, y: f64| {
        let guess = if iv.contains(x_ref) {
            x_ref
        } else {
            0.5 * (iv.lower + iv.upper)
        };
        invert_increasing(
            |x| (ps(t, x), Some(js(t, x))),
            y,
            guess,
            1.0,
            iv.lower,
            iv.upper,
            &Tolerance::quantile(),
        )
        .unwrap_or(f64::NAN)
    };
    SpaceTimeTransform::new(
        "wiener",
        TimeMap {
            forward: phi,
            inverse: phi_inv,
            derivative: phi_dot,
        },
        psi,
        jacobian,
        vec![Piece::new(iv.lower, iv.upper, true, inverse)],
    )
}
