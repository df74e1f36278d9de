//! Copulas of piecewise-monotone transforms of a diffusion.
//!
//! For `Y = ψ(t, X_t)` the copula density is a double sum over preimages,
//! `c^Y(u, v) = Σ_z Σ_x w(s, z, q) w(t, x, r) c^X(F^X_s(z), F^X_t(x))`, with
//! `q = [F^Y_s]⁻¹(u)`, `r = [F^Y_t]⁻¹(v)` and weights proportional to
//! `f^X(z) / |J(z)|` over the preimages of each point.

use std::sync::Arc;

use super::SpaceTimeTransform;
use crate::copula::{from_transition, Coord, CopulaFamily, CopulaSurface, Provenance};
use crate::error::{Error, Result};
use crate::models::{Marginal, Model, TransitionKernel};
use crate::special_fn::roots::invert_increasing;
use crate::special_fn::{clamp_prob, Tolerance};

/// Marginal of `Y = ψ(t, X_t)` at a fixed `t`.
#[derive(Clone)]
pub struct PushedMarginal {
    x: Marginal,
    transform: Arc<SpaceTimeTransform>,
    t: f64,
}

impl PushedMarginal {
    pub fn new(x: Marginal, transform: Arc<SpaceTimeTransform>) -> Self {
        let t = x.time();
        Self { x, transform, t }
    }

    fn range(&self) -> (f64, f64) {
        self.transform
            .pieces()
            .iter()
            .map(|p| self.transform.image(p, self.t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
                (a.min(lo), b.max(hi))
            })
    }

    /// Preimages `z` of `q` with their weights `w(t, z, q)`, summing to one.
    pub fn weights(&self, q: f64) -> Result<Vec<(f64, f64)>> {
        let zs = self.transform.preimages(self.t, q);
        let mut raw = Vec::with_capacity(zs.len());
        for z in zs {
            let j = self.transform.jacobian(self.t, z).abs();
            if !(j > 0.0 && j.is_finite()) {
                return Err(Error::SingularJacobian { t: self.t, x: z });
            }
            raw.push((z, self.x.pdf(z) / j));
        }
        let total: f64 = raw.iter().map(|r| r.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::domain(format!(
                "no probability mass above y = {q} at t = {}",
                self.t
            )));
        }
        // The last weight closes the sum, so a left-to-right sum is exactly one.
        let mut out: Vec<(f64, f64)> = raw.into_iter().map(|(z, r)| (z, r / total)).collect();
        let head: f64 = out[..out.len() - 1].iter().map(|&(_, w)| w).sum();
        if let Some(last) = out.last_mut() {
            last.1 = 1.0 - head;
        }
        Ok(out)
    }

    pub fn pdf(&self, q: f64) -> f64 {
        self.transform
            .preimages(self.t, q)
            .into_iter()
            .map(|z| self.x.pdf(z) / self.transform.jacobian(self.t, z).abs())
            .sum()
    }

    pub fn cdf(&self, q: f64) -> f64 {
        let fx = |x: f64| {
            if x == f64::NEG_INFINITY {
                0.0
            } else if x == f64::INFINITY {
                1.0
            } else {
                self.x.cdf(x)
            }
        };
        let mut total = 0.0;
        for p in self.transform.pieces() {
            let (lo, hi) = self.transform.image(p, self.t);
            if q <= lo {
                continue;
            }
            let mass = fx(p.upper) - fx(p.lower);
            total += if q >= hi {
                mass
            } else {
                let z = p.inverse(self.t, q);
                if p.increasing {
                    fx(z) - fx(p.lower)
                } else {
                    fx(p.upper) - fx(z)
                }
            };
        }
        total.clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        let p = clamp_prob(p);
        let (lo, hi) = self.range();
        let guess = self.transform.psi(self.t, self.x.quantile(p)?);
        let spread = (self.transform.psi(self.t, self.x.quantile(0.75)?)
            - self.transform.psi(self.t, self.x.quantile(0.25)?))
        .abs();
        invert_increasing(
            |q| (self.cdf(q), Some(self.pdf(q))),
            p,
            guess,
            spread.max(1e-3),
            lo,
            hi,
            &Tolerance::quantile(),
        )
    }
}

struct Nonmonotone {
    kernel: Arc<dyn TransitionKernel>,
    ys: PushedMarginal,
    yt: PushedMarginal,
    xt: Marginal,
    s: f64,
    t: f64,
}

/// Flattened `(z, w)` pairs.
fn flatten(pairs: Vec<(f64, f64)>) -> Coord {
    pairs.into_iter().flat_map(|(z, w)| [z, w]).collect()
}

impl CopulaFamily for Nonmonotone {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(flatten(self.ys.weights(self.ys.quantile(u)?)?))
    }

    fn coord_v(&self, v: f64) -> Result<Coord> {
        let pairs = self.yt.weights(self.yt.quantile(v)?)?;
        // (x, w, f^X_t(x)) triples.
        Ok(pairs.into_iter().flat_map(|(x, w)| [x, w, self.xt.pdf(x)]).collect())
    }

    fn density_at(&self, a: &Coord, b: &Coord) -> f64 {
        let mut total = 0.0;
        for zw in a.chunks_exact(2) {
            for xwf in b.chunks_exact(3) {
                let cx = self.kernel.pdf(self.s, zw[0], self.t, xwf[0]) / xwf[2];
                total += zw[1] * xwf[1] * cx;
            }
        }
        total
    }
}

/// Copula of `Y_{φ(t)} = ψ(t, X_t)` together with the `Y` marginals.
pub struct NonmonotoneCopula {
    pub surface: CopulaSurface,
    pub marginal_s: PushedMarginal,
    pub marginal_t: PushedMarginal,
}

/// Copula of a piecewise-monotone transform of `model` at `(φ(s), φ(t))`.
///
/// With a single piece the double sum collapses and the result is the
/// model's own copula reported at the transformed times.
pub fn nonmonotone_copula(model: &Model, transform: &SpaceTimeTransform, s: f64, t: f64) -> Result<NonmonotoneCopula> {
    let iv = model.spec().interval;
    let tr = Arc::new(transform.restrict(iv.lower, iv.upper)?);
    let (ps, pt) = (tr.phi(s), tr.phi(t));
    if !(ps.is_finite() && pt.is_finite() && ps < pt) {
        return Err(Error::TimeMap(format!("φ does not order s = {s} < t = {t}")));
    }
    let marginal_s = PushedMarginal::new(model.marginal(s)?, Arc::clone(&tr));
    let marginal_t = PushedMarginal::new(model.marginal(t)?, Arc::clone(&tr));
    let surface = if tr.is_monotone() {
        from_transition(model, s, t)?.at_times(ps, pt)?
    } else {
        let family = Nonmonotone {
            kernel: Arc::clone(model.kernel()),
            ys: marginal_s.clone(),
            yt: marginal_t.clone(),
            xt: model.marginal(t)?,
            s,
            t,
        };
        let mut params = model.params().clone();
        params.insert("x0", model.x0());
        CopulaSurface::new(
            Arc::new(family),
            ps,
            pt,
            Provenance::Nonmonotone,
            params,
            format!("{}[{}]", tr.name(), model.label()),
        )?
    };
    Ok(NonmonotoneCopula {
        surface,
        marginal_s,
        marginal_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::rbm_closed_form;
    use crate::models::{make_model, ModelId, Params};
    use crate::stt::{Piece, TimeMap};

    fn abs_map() -> SpaceTimeTransform {
        SpaceTimeTransform::new(
            "abs",
            TimeMap::identity(),
            Arc::new(|_, x: f64| x.abs()),
            Arc::new(|_, x: f64| if x == 0.0 { 0.0 } else { x.signum() }),
            vec![
                Piece::new(f64::NEG_INFINITY, 0.0, false, |_, y| -y),
                Piece::new(0.0, f64::INFINITY, true, |_, y| y),
            ],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_weights_are_halves() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0).unwrap();
        let r = nonmonotone_copula(&bm, &abs_map(), 1.0, 2.0).unwrap();
        for &q in &[0.1, 1.0, 3.0] {
            let w = r.marginal_s.weights(q).unwrap();
            assert_eq!(w.len(), 2);
            assert!(w.iter().all(|&(_, wi)| wi == 0.5));
        }
    }

    #[test]
    fn folded_brownian_copula() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0).unwrap();
        let r = nonmonotone_copula(&bm, &abs_map(), 1.0, 2.0).unwrap();
        let c = rbm_closed_form(1.0, 2.0).unwrap();
        let (a, b) = (r.surface.density(0.3, 0.7).unwrap(), c.density(0.3, 0.7).unwrap());
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn jacobian_zero_is_reported() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0).unwrap();
        let r = nonmonotone_copula(&bm, &abs_map(), 1.0, 2.0).unwrap();
        assert!(matches!(r.marginal_s.weights(0.0), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn monotone_input_is_the_time_changed_copula() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0).unwrap();
        let r = nonmonotone_copula(&bm, &SpaceTimeTransform::identity(), 1.0, 2.0).unwrap();
        let c = from_transition(&bm, 1.0, 2.0).unwrap();
        assert_eq!(r.surface.density(0.2, 0.6).unwrap(), c.density(0.2, 0.6).unwrap());
        assert_eq!(r.surface.provenance(), Provenance::TimeChange);
    }
}
