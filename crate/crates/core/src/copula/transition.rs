//! Copula density from a transition kernel and its marginals.

use std::sync::Arc;

use super::{Coord, CopulaFamily, CopulaSurface, Provenance};
use crate::error::{Error, Result};
use crate::models::{Marginal, Model, TransitionKernel};

struct FromKernel {
    kernel: Arc<dyn TransitionKernel>,
    ms: Marginal,
    mt: Marginal,
    s: f64,
    t: f64,
}

impl CopulaFamily for FromKernel {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(vec![self.ms.quantile(u)?, 0.0])
    }

    fn coord_v(&self, v: f64) -> Result<Coord> {
        let y = self.mt.quantile(v)?;
        Ok(vec![y, self.mt.pdf(y)])
    }

    fn density_at(&self, a: &Coord, b: &Coord) -> f64 {
        self.kernel.pdf(self.s, a[0], self.t, b[0]) / b[1]
    }

    fn conditional_at(&self, a: &Coord, b: &Coord) -> Option<f64> {
        Some(self.kernel.cdf(self.s, a[0], self.t, b[0]))
    }
}

/// `c_{s,t}(u, v) = f_{t|s}(F_t⁻¹(v) | F_s⁻¹(u)) / f_t(F_t⁻¹(v))`.
pub fn from_transition(model: &Model, s: f64, t: f64) -> Result<CopulaSurface> {
    if !(s > model.t0() && s < t) {
        return Err(Error::domain(format!(
            "need t0 < s < t, got t0 = {}, s = {s}, t = {t}",
            model.t0()
        )));
    }
    let family = FromKernel {
        kernel: Arc::clone(model.kernel()),
        ms: model.marginal(s)?,
        mt: model.marginal(t)?,
        s,
        t,
    };
    let mut params = model.params().clone();
    params.insert("x0", model.x0());
    CopulaSurface::new(
        Arc::new(family),
        s,
        t,
        Provenance::FromTransition,
        params,
        model.label().to_string(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{gaussian_closed_form, ou_closed_form};
    use crate::models::{make_model, ModelId, Params};

    #[test]
    fn brownian_center_value() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0).unwrap();
        let c = from_transition(&bm, 1.0, 2.0).unwrap();
        assert!((c.density(0.5, 0.5).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn drifted_and_geometric_share_the_gaussian_copula() {
        let p = Params::new().with("mu", 0.4).with("sigma", 1.7);
        let g = gaussian_closed_form(0.7, 1.9).unwrap();
        for id in [ModelId::BmDrift, ModelId::Gbm] {
            let x0 = if id == ModelId::Gbm { 2.0 } else { -1.0 };
            let m = make_model(id, &p, x0, 0.0).unwrap();
            let c = from_transition(&m, 0.7, 1.9).unwrap();
            for &(u, v) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.3), (0.6, 0.95)] {
                let (a, b) = (c.density(u, v).unwrap(), g.density(u, v).unwrap());
                assert!((a - b).abs() < 1e-10 * b.max(1.0), "{id} ({u}, {v}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn ou_decorrelates_over_long_horizons() {
        let alpha = 0.5;
        let p = Params::new().with("alpha", alpha).with("beta", 0.3).with("sigma", 1.1);
        let m = make_model(ModelId::Ou, &p, 2.0, 0.0).unwrap();
        let c = from_transition(&m, 1.0, 1.0 + 100.0 / alpha).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let (u, v) = (0.2 + 0.1 * i as f64, 0.2 + 0.1 * j as f64);
                assert!((c.density(u, v).unwrap() - 1.0).abs() <= 0.01);
            }
        }
        let o = ou_closed_form(alpha, 1.0, 3.0).unwrap();
        let f = from_transition(&m, 1.0, 3.0).unwrap();
        assert!((o.density(0.3, 0.6).unwrap() - f.density(0.3, 0.6).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn needs_times_after_start() {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 1.0).unwrap();
        assert!(from_transition(&bm, 1.0, 2.0).is_err());
        assert!(from_transition(&bm, 1.5, 1.2).is_err());
    }
}
