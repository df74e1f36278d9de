//! Built-in transformation chains between catalog models.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{Piece, SpaceTimeTransform, TimeMap};
use crate::error::{Error, Result};
use crate::models::{make_model, Model, ModelId, Params};
use crate::special_fn::{expm1_ratio, ln1p_ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chain {
    OuToBm,
    BmToSpecialCir,
    CirToRayleigh,
    RayleighToBessel,
    CirToBessel,
}

impl Chain {
    pub const ALL: [Chain; 5] = [
        Chain::OuToBm,
        Chain::BmToSpecialCir,
        Chain::CirToRayleigh,
        Chain::RayleighToBessel,
        Chain::CirToBessel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Chain::OuToBm => "ou_to_bm",
            Chain::BmToSpecialCir => "bm_to_special_cir",
            Chain::CirToRayleigh => "cir_to_rayleigh",
            Chain::RayleighToBessel => "rayleigh_to_bessel",
            Chain::CirToBessel => "cir_to_bessel",
        }
    }

    /// Catalog models the chain accepts as its source.
    pub fn sources(self) -> &'static [ModelId] {
        match self {
            Chain::OuToBm => &[ModelId::Ou],
            Chain::BmToSpecialCir => &[ModelId::Bm, ModelId::Rbm],
            Chain::CirToRayleigh | Chain::CirToBessel => &[ModelId::Cir, ModelId::CirSpecial],
            Chain::RayleighToBessel => &[ModelId::Rayleigh],
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Chain::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownChain(s.to_string()))
    }
}

fn cir_triple(p: &Params) -> Result<(f64, f64, f64)> {
    let alpha = p.get("alpha")?;
    let sigma = p.get("sigma")?;
    if sigma <= 0.0 {
        return Err(Error::param("sigma", "must be positive"));
    }
    let beta = p.get_or("beta", 0.25 * sigma * sigma)?;
    if beta <= 0.0 {
        return Err(Error::param("beta", "must be positive"));
    }
    Ok((alpha, beta, sigma))
}

fn ou_to_bm(alpha: f64, beta: f64, sigma: f64) -> Result<SpaceTimeTransform> {
    if alpha == 0.0 {
        return Err(Error::param("alpha", "must be non-zero for the OU map"));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let level = beta / alpha;
    SpaceTimeTransform::new(
        Chain::OuToBm.as_str(),
        TimeMap {
            forward: Arc::new(move |t| expm1_ratio(2.0 * alpha, t)),
            inverse: Arc::new(move |tau| ln1p_ratio(2.0 * alpha, tau)),
            derivative: Arc::new(move |t| (2.0 * alpha * t).exp()),
        },
        Arc::new(move |t, x| (alpha * t).exp() / sigma * (x - level)),
        Arc::new(move |t, _| (alpha * t).exp() / sigma),
        vec![Piece::new(f64::NEG_INFINITY, f64::INFINITY, true, move |t, y| {
            sigma * y * (-alpha * t).exp() + level
        })],
    )
}

fn bm_to_special_cir(alpha: f64, sigma: f64) -> Result<SpaceTimeTransform> {
    if alpha < 0.0 {
        return Err(Error::TimeMap(format!(
            "ln(αt + 1)/α is undefined beyond t = {} for α = {alpha}",
            -1.0 / alpha
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let s2 = sigma * sigma;
    let root = move |t: f64, y: f64| (4.0 * (alpha * t + 1.0) * y.max(0.0)).sqrt() / sigma;
    SpaceTimeTransform::new(
        Chain::BmToSpecialCir.as_str(),
        TimeMap {
            forward: Arc::new(move |t| ln1p_ratio(alpha, t)),
            inverse: Arc::new(move |tau| expm1_ratio(alpha, tau)),
            derivative: Arc::new(move |t| 1.0 / (alpha * t + 1.0)),
        },
        Arc::new(move |t, x| s2 * x * x / (4.0 * (alpha * t + 1.0))),
        Arc::new(move |t, x| s2 * x / (2.0 * (alpha * t + 1.0))),
        vec![
            Piece::new(f64::NEG_INFINITY, 0.0, false, move |t, y| -root(t, y)),
            Piece::new(0.0, f64::INFINITY, true, root),
        ],
    )
}

fn cir_to_rayleigh(sigma: f64) -> Result<SpaceTimeTransform> {
    SpaceTimeTransform::new(
        Chain::CirToRayleigh.as_str(),
        TimeMap::identity(),
        Arc::new(move |_, x: f64| 2.0 * x.max(0.0).sqrt() / sigma),
        Arc::new(move |_, x: f64| 1.0 / (sigma * x.sqrt())),
        vec![Piece::new(0.0, f64::INFINITY, true, move |_, y| {
            let r = 0.5 * sigma * y;
            r * r
        })],
    )
}

fn rayleigh_to_bessel(b: f64) -> Result<SpaceTimeTransform> {
    SpaceTimeTransform::new(
        Chain::RayleighToBessel.as_str(),
        TimeMap {
            forward: Arc::new(move |t| expm1_ratio(-2.0 * b, t)),
            inverse: Arc::new(move |tau| ln1p_ratio(-2.0 * b, tau)),
            derivative: Arc::new(move |t| (-2.0 * b * t).exp()),
        },
        Arc::new(move |t, x| x * (-b * t).exp()),
        Arc::new(move |t, _| (-b * t).exp()),
        vec![Piece::new(0.0, f64::INFINITY, true, move |t, y| y * (b * t).exp())],
    )
}

/// Build a chain from its parameters.
///
/// * `ou_to_bm`: `alpha`, `beta`, `sigma` of the OU source.
/// * `bm_to_special_cir`: `alpha`, `sigma` of the target CIR (`β = σ²/4`).
/// * `cir_to_rayleigh`, `cir_to_bessel`: `alpha`, `sigma` and `beta`
///   (defaulting to `σ²/4`) of the CIR source.
/// * `rayleigh_to_bessel`: `a`, `b` of the Rayleigh source.
pub fn builtin_chain(chain: Chain, params: &Params) -> Result<SpaceTimeTransform> {
    match chain {
        Chain::OuToBm => ou_to_bm(params.get("alpha")?, params.get("beta")?, params.get("sigma")?),
        Chain::BmToSpecialCir => bm_to_special_cir(params.get("alpha")?, params.get("sigma")?),
        Chain::CirToRayleigh => cir_to_rayleigh(cir_triple(params)?.2),
        Chain::RayleighToBessel => {
            params.get("a")?;
            rayleigh_to_bessel(params.get("b")?)
        }
        Chain::CirToBessel => {
            let (alpha, _, sigma) = cir_triple(params)?;
            let t = cir_to_rayleigh(sigma)?.compose(&rayleigh_to_bessel(-0.5 * alpha)?)?;
            Ok(SpaceTimeTransform {
                name: Chain::CirToBessel.as_str().to_string(),
                ..t
            })
        }
    }
}

/// The chain applied to `source`, together with the catalog model it lands on.
///
/// Chain parameters are the source parameters overlaid with `extra`; only
/// `bm_to_special_cir` needs extras (`alpha`, `sigma` of the target). The target
/// starts at `ψ(t0, x0)` at time `φ(t0)`.
pub fn builtin_target(chain: Chain, source: &Model, extra: &Params) -> Result<(SpaceTimeTransform, Model)> {
    let id = source
        .id()
        .ok_or_else(|| Error::domain("chain sources must be catalog models"))?;
    if !chain.sources().contains(&id) {
        return Err(Error::domain(format!("{chain} does not accept a {id} source")));
    }
    let mut params = source.params().clone();
    for (k, v) in extra.iter() {
        params.insert(k, v);
    }
    let transform = builtin_chain(chain, &params)?;
    let (target, tp) = match chain {
        Chain::OuToBm => (ModelId::Bm, Params::new()),
        Chain::BmToSpecialCir => (
            ModelId::CirSpecial,
            Params::new()
                .with("alpha", params.get("alpha")?)
                .with("sigma", params.get("sigma")?),
        ),
        Chain::CirToRayleigh => {
            let (alpha, beta, sigma) = cir_triple(&params)?;
            (
                ModelId::Rayleigh,
                Params::new()
                    .with("a", 2.0 * beta / (sigma * sigma) - 0.5)
                    .with("b", -0.5 * alpha),
            )
        }
        Chain::RayleighToBessel => (ModelId::Bessel, Params::new().with("delta", params.get("a")?)),
        Chain::CirToBessel => {
            let (_, beta, sigma) = cir_triple(&params)?;
            (
                ModelId::Bessel,
                Params::new().with("delta", 2.0 * beta / (sigma * sigma) - 0.5),
            )
        }
    };
    let t0 = source.t0();
    let model = make_model(target, &tp, transform.psi(t0, source.x0()), transform.phi(t0))?;
    Ok((transform, model))
}
