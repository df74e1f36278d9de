//! Pushforward of transition kernels and models through monotone transforms.

use std::sync::Arc;

use rand::RngCore;

use super::{Piece, SpaceTimeTransform};
use crate::error::{Error, Result};
use crate::models::{DiffusionSpec, Interval, Model, TransitionKernel};
use crate::special_fn::clamp_prob;

/// Kernel of `Y_{φ(t)} = ψ(t, X_t)` for a single-piece transform.
pub struct PushedKernel {
    inner: Arc<dyn TransitionKernel>,
    transform: SpaceTimeTransform,
    piece: Piece,
}

enum Located {
    Below,
    Inside(f64),
    Above,
}

impl PushedKernel {
    fn times(&self, sigma: f64, tau: f64) -> (f64, f64) {
        let s = self.transform.phi_inv(sigma).unwrap_or(f64::NAN);
        let t = self.transform.phi_inv(tau).unwrap_or(f64::NAN);
        (s, t)
    }

    fn locate(&self, t: f64, y: f64) -> Located {
        let (lo, hi) = self.transform.image(&self.piece, t);
        if y < lo {
            Located::Below
        } else if y > hi {
            Located::Above
        } else {
            Located::Inside(self.piece.inverse(t, y))
        }
    }

    fn start(&self, s: f64, y0: f64) -> f64 {
        self.piece.inverse(s, y0)
    }
}

impl TransitionKernel for PushedKernel {
    fn pdf(&self, sigma: f64, y0: f64, tau: f64, y: f64) -> f64 {
        let (s, t) = self.times(sigma, tau);
        match self.locate(t, y) {
            Located::Inside(x) => self.inner.pdf(s, self.start(s, y0), t, x) / self.transform.jacobian(t, x).abs(),
            _ => 0.0,
        }
    }

    fn cdf(&self, sigma: f64, y0: f64, tau: f64, y: f64) -> f64 {
        let (s, t) = self.times(sigma, tau);
        match self.locate(t, y) {
            Located::Below => 0.0,
            Located::Above => 1.0,
            Located::Inside(x) => {
                let x0 = self.start(s, y0);
                if self.piece.increasing {
                    self.inner.cdf(s, x0, t, x)
                } else {
                    self.inner.sf(s, x0, t, x)
                }
            }
        }
    }

    fn sf(&self, sigma: f64, y0: f64, tau: f64, y: f64) -> f64 {
        let (s, t) = self.times(sigma, tau);
        match self.locate(t, y) {
            Located::Below => 1.0,
            Located::Above => 0.0,
            Located::Inside(x) => {
                let x0 = self.start(s, y0);
                if self.piece.increasing {
                    self.inner.sf(s, x0, t, x)
                } else {
                    self.inner.cdf(s, x0, t, x)
                }
            }
        }
    }

    fn quantile(&self, sigma: f64, y0: f64, tau: f64, p: f64) -> Result<f64> {
        let s = self.transform.phi_inv(sigma)?;
        let t = self.transform.phi_inv(tau)?;
        let p = clamp_prob(p);
        let q = if self.piece.increasing { p } else { 1.0 - p };
        let x = self.inner.quantile(s, self.start(s, y0), t, q)?;
        Ok(self.transform.psi(t, x))
    }

    fn sample(&self, sigma: f64, y0: f64, tau: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let s = self.transform.phi_inv(sigma)?;
        let t = self.transform.phi_inv(tau)?;
        let x = self.inner.sample(s, self.start(s, y0), t, rng)?;
        Ok(self.transform.psi(t, x))
    }
}

fn restricted_to(model: &Model, transform: &SpaceTimeTransform) -> Result<SpaceTimeTransform> {
    let iv = model.spec().interval;
    let r = transform.restrict(iv.lower, iv.upper)?;
    if !r.is_monotone() {
        return Err(Error::NotMonotone {
            pieces: r.pieces().len(),
        });
    }
    Ok(r)
}

/// Kernel of `Y_{φ(t)} = ψ(t, X_t)`; the transform is first restricted to the
/// model's interval and must be monotone there.
pub fn push_transition(model: &Model, transform: &SpaceTimeTransform) -> Result<Arc<dyn TransitionKernel>> {
    let r = restricted_to(model, transform)?;
    let t0 = model.t0();
    let tau0 = r.phi(t0);
    if !(tau0.is_finite() && r.phi_inv(tau0).is_ok()) {
        return Err(Error::TimeMap(format!("φ is not invertible at t0 = {t0}")));
    }
    let piece = r.pieces()[0].clone();
    Ok(Arc::new(PushedKernel {
        inner: Arc::clone(model.kernel()),
        transform: r,
        piece,
    }))
}

/// The model `Y` with kernel, coefficients (by Itô's formula), interval,
/// boundaries and initial condition `(ψ(t0, x0), φ(t0))`.
pub fn push_model(model: &Model, transform: &SpaceTimeTransform) -> Result<Model> {
    let r = restricted_to(model, transform)?;
    let kernel = push_transition(model, transform)?;
    let t0 = model.t0();
    let piece = r.pieces()[0].clone();
    let (lo, hi) = r.image(&piece, t0);
    let mut boundaries = model.spec().boundaries;
    if !piece.increasing {
        boundaries.reverse();
    }
    let (rd, sd, pd) = (r.clone(), model.spec().clone(), piece.clone());
    let coeffs = Arc::new(move |y: f64, tau: f64| -> (f64, f64) {
        match rd.phi_inv(tau) {
            Ok(t) => rd.ito_coefficients(&sd, t, pd.inverse(t, y)),
            Err(_) => (f64::NAN, f64::NAN),
        }
    });
    let c2 = Arc::clone(&coeffs);
    let spec = DiffusionSpec {
        drift: Arc::new(move |y, tau| coeffs(y, tau).0),
        diffusion: Arc::new(move |y, tau| c2(y, tau).1),
        interval: Interval { lower: lo, upper: hi },
        boundaries,
        params: model.params().clone(),
    };
    Model::from_parts(
        format!("{}[{}]", r.name(), model.label()),
        spec,
        kernel,
        None,
        r.psi(t0, model.x0()),
        r.phi(t0),
    )
}
