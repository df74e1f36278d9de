//! Catalog of diffusion models with exact transition kernels.
//!
//! Every model is immutable once built. A [`Model`] bundles the SDE
//! description ([`DiffusionSpec`]), an exact [`TransitionKernel`], the initial
//! condition `(x0, t0)` and, where one exists, the [`StationaryLaw`].

mod cir;
mod gaussian;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{big_phi, gamma_p, ln_gamma, phi, phi_inv, roots::invert_increasing, Tolerance};

pub use cir::{CirKernel, SqrtKernel};
pub use gaussian::{GaussianKernel, LogNormalKernel, ReflectedBmKernel};

/// Longest time horizon the kernels are validated for.
pub const TIME_HORIZON: f64 = 1e6;

/// Catalog identifiers. The string forms are what the CLI accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Bm,
    BmDrift,
    Gbm,
    Ou,
    Rbm,
    Cir,
    CirSpecial,
    Rayleigh,
    Bessel,
}

impl ModelId {
    pub const ALL: [ModelId; 9] = [
        ModelId::Bm,
        ModelId::BmDrift,
        ModelId::Gbm,
        ModelId::Ou,
        ModelId::Rbm,
        ModelId::Cir,
        ModelId::CirSpecial,
        ModelId::Rayleigh,
        ModelId::Bessel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Bm => "bm",
            ModelId::BmDrift => "bm_drift",
            ModelId::Gbm => "gbm",
            ModelId::Ou => "ou",
            ModelId::Rbm => "rbm",
            ModelId::Cir => "cir",
            ModelId::CirSpecial => "cir_special",
            ModelId::Rayleigh => "rayleigh",
            ModelId::Bessel => "bessel",
        }
    }

    /// Parameter names the catalog entry requires.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelId::Bm | ModelId::Rbm => &[],
            ModelId::BmDrift | ModelId::Gbm => &["mu", "sigma"],
            ModelId::Ou | ModelId::Cir => &["alpha", "beta", "sigma"],
            ModelId::CirSpecial => &["alpha", "sigma"],
            ModelId::Rayleigh => &["a", "b"],
            ModelId::Bessel => &["delta"],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Named real parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let v = *self.0.get(name).ok_or_else(|| Error::param(name, "missing"))?;
        if !v.is_finite() {
            return Err(Error::param(name, format!("must be finite, got {v}")));
        }
        Ok(v)
    }

    pub fn get_or(&self, name: &str, default: f64) -> Result<f64> {
        if self.0.contains_key(name) {
            self.get(name)
        } else {
            Ok(default)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `name=value` pairs joined by commas.
    pub fn render(&self) -> String {
        self.iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in self.iter() {
            if !allowed.contains(&k) {
                return Err(Error::param(k, "not a parameter of this model"));
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, f64)> for Params {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Params(iter.into_iter().collect())
    }
}

/// Feller classification of an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Natural,
    RegularReflecting,
    Entrance,
}

impl Boundary {
    /// Whether a path may be started exactly at this endpoint.
    pub fn admits_start(self) -> bool {
        !matches!(self, Boundary::Natural)
    }
}

/// Open diffusion interval `(lower, upper)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

pub type Coefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift `μ(x, t)`, diffusion coefficient `σ(x, t)`, interval and boundaries.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub interval: Interval,
    /// Lower and upper endpoint classes.
    pub boundaries: [Boundary; 2],
    pub params: Params,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("interval", &self.interval)
            .field("boundaries", &self.boundaries)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    pub fn drift(&self, x: f64, t: f64) -> f64 {
        (self.drift)(x, t)
    }

    pub fn diffusion(&self, x: f64, t: f64) -> f64 {
        (self.diffusion)(x, t)
    }
}

/// Uniform draw on the open interval `(0, 1)`.
pub fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exact transition law of `X_t` given `X_s = y`, `s < t`.
///
/// Evaluations outside the diffusion interval return the obvious limits
/// (zero density, cdf 0 or 1) rather than errors.
pub trait TransitionKernel: Send + Sync {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64;

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64;

    /// Upper tail `1 - F`; override where cancellation matters.
    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        1.0 - self.cdf(s, y, t, x)
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64>;

    /// `∂f/∂x`, by central difference unless overridden.
    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1e-3);
        (self.pdf(s, y, t, x + h) - self.pdf(s, y, t, x - h)) / (2.0 * h)
    }

    /// `∂F/∂t`, by central difference (relative step 1e-5) unless overridden.
    fn cdf_dt(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let h = (1e-5 * t.abs().max(1.0)).min(0.5 * (t - s));
        (self.cdf(s, y, t + h, x) - self.cdf(s, y, t - h, x)) / (2.0 * h)
    }

    /// Exact draw by inversion.
    fn sample(&self, s: f64, y: f64, t: f64, rng: &mut dyn RngCore) -> Result<f64> {
        self.quantile(s, y, t, open_unit(rng))
    }
}

/// Stationary distribution of an ergodic catalog model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryLaw {
    Gaussian { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl StationaryLaw {
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            StationaryLaw::Gaussian { mean, sd } => phi((x - mean) / sd) / sd,
            StationaryLaw::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
            }
        }
    }

    /// `g'(x)`.
    pub fn pdf_dx(&self, x: f64) -> f64 {
        match *self {
            StationaryLaw::Gaussian { mean, sd } => -(x - mean) / (sd * sd) * self.pdf(x),
            StationaryLaw::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                self.pdf(x) * ((shape - 1.0) / x - 1.0 / scale)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            StationaryLaw::Gaussian { mean, sd } => big_phi((x - mean) / sd),
            StationaryLaw::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_p(shape, x / scale).unwrap_or(f64::NAN)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
        }
        match *self {
            StationaryLaw::Gaussian { mean, sd } => Ok(mean + sd * phi_inv(p)),
            StationaryLaw::Gamma { shape, scale } => {
                let p = crate::special_fn::clamp_prob(p);
                let mean = shape * scale;
                let sd = shape.sqrt() * scale;
                invert_increasing(
                    |x| (self.cdf(x), Some(self.pdf(x))),
                    p,
                    (mean + sd * phi_inv(p)).max(1e-3 * mean),
                    0.25 * sd,
                    0.0,
                    f64::INFINITY,
                    &Tolerance::quantile(),
                )
            }
        }
    }
}

/// A catalog diffusion bound to its initial condition `(x0, t0)`.
#[derive(Clone)]
pub struct Model {
    label: String,
    id: Option<ModelId>,
    spec: DiffusionSpec,
    kernel: Arc<dyn TransitionKernel>,
    stationary: Option<StationaryLaw>,
    x0: f64,
    t0: f64,
    analytic_dt: bool,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("label", &self.label)
            .field("spec", &self.spec)
            .field("x0", &self.x0)
            .field("t0", &self.t0)
            .finish_non_exhaustive()
    }
}

fn check_initial(spec: &DiffusionSpec, x0: f64, t0: f64) -> Result<()> {
    if !x0.is_finite() {
        return Err(Error::param("x0", "must be finite"));
    }
    if !(t0.is_finite() && (0.0..TIME_HORIZON).contains(&t0)) {
        return Err(Error::param("t0", format!("must lie in [0, {TIME_HORIZON}), got {t0}")));
    }
    let iv = spec.interval;
    let ok = iv.contains(x0)
        || (x0 == iv.lower && spec.boundaries[0].admits_start())
        || (x0 == iv.upper && spec.boundaries[1].admits_start());
    if !ok {
        return Err(Error::param(
            "x0",
            format!(
                "{x0} is not an admissible starting point of ({}, {})",
                iv.lower, iv.upper
            ),
        ));
    }
    Ok(())
}

impl Model {
    /// Assemble a model from parts; used for pushforwards and custom kernels.
    pub fn from_parts(
        label: impl Into<String>,
        spec: DiffusionSpec,
        kernel: Arc<dyn TransitionKernel>,
        stationary: Option<StationaryLaw>,
        x0: f64,
        t0: f64,
    ) -> Result<Self> {
        check_initial(&spec, x0, t0)?;
        Ok(Self {
            label: label.into(),
            id: None,
            spec,
            kernel,
            stationary,
            x0,
            t0,
            analytic_dt: false,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn id(&self) -> Option<ModelId> {
        self.id
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.spec.params
    }

    pub fn kernel(&self) -> &Arc<dyn TransitionKernel> {
        &self.kernel
    }

    pub fn stationary(&self) -> Option<&StationaryLaw> {
        self.stationary.as_ref()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Whether `∂F_t/∂t` is available in closed form.
    pub fn has_analytic_time_derivative(&self) -> bool {
        self.analytic_dt
    }

    /// Same model restarted from a different initial condition.
    pub fn restarted(&self, x0: f64, t0: f64) -> Result<Self> {
        check_initial(&self.spec, x0, t0)?;
        Ok(Self { x0, t0, ..self.clone() })
    }

    fn check_times(&self, s: f64, t: f64) -> Result<()> {
        if !(s.is_finite() && t.is_finite()) {
            return Err(Error::domain("times must be finite"));
        }
        if s >= t {
            return Err(Error::domain(format!("need s < t, got s = {s}, t = {t}")));
        }
        if s < self.t0 || t >= TIME_HORIZON {
            return Err(Error::domain(format!(
                "times must lie in [{}, {TIME_HORIZON}), got s = {s}, t = {t}",
                self.t0
            )));
        }
        Ok(())
    }

    pub fn transition_pdf(&self, s: f64, y: f64, t: f64, x: f64) -> Result<f64> {
        self.check_times(s, t)?;
        Ok(self.kernel.pdf(s, y, t, x))
    }

    pub fn transition_cdf(&self, s: f64, y: f64, t: f64, x: f64) -> Result<f64> {
        self.check_times(s, t)?;
        Ok(self.kernel.cdf(s, y, t, x))
    }

    pub fn transition_quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        self.check_times(s, t)?;
        crate::special_fn::check_open_unit("p", p)?;
        self.kernel.quantile(s, y, t, p)
    }

    /// Exact draw of `X_t` given `X_s = y`.
    pub fn sample_transition(&self, s: f64, y: f64, t: f64, rng: &mut dyn RngCore) -> Result<f64> {
        self.check_times(s, t)?;
        self.kernel.sample(s, y, t, rng)
    }

    /// Marginal law `F_t = F_{t|t0}(· | x0)`.
    pub fn marginal(&self, t: f64) -> Result<Marginal> {
        if t <= self.t0 {
            return Err(Error::domain(format!("marginal needs t > t0 = {}, got {t}", self.t0)));
        }
        self.check_times(self.t0, t)?;
        Ok(Marginal {
            kernel: Arc::clone(&self.kernel),
            t0: self.t0,
            x0: self.x0,
            t,
        })
    }
}

/// Marginal distribution of a model at a fixed time.
#[derive(Clone)]
pub struct Marginal {
    kernel: Arc<dyn TransitionKernel>,
    t0: f64,
    x0: f64,
    t: f64,
}

impl Marginal {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.kernel.pdf(self.t0, self.x0, self.t, x)
    }

    pub fn pdf_dx(&self, x: f64) -> f64 {
        self.kernel.pdf_dx(self.t0, self.x0, self.t, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.kernel.cdf(self.t0, self.x0, self.t, x)
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.kernel.sf(self.t0, self.x0, self.t, x)
    }

    /// `∂F_t(x)/∂t`.
    pub fn cdf_dt(&self, x: f64) -> f64 {
        self.kernel.cdf_dt(self.t0, self.x0, self.t, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.kernel.quantile(self.t0, self.x0, self.t, p)
    }
}

fn positive(params: &Params, name: &str) -> Result<f64> {
    let v = params.get(name)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn coefficient(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

/// Build a catalog model. Unknown parameter names are rejected.
pub fn make_model(id: ModelId, params: &Params, x0: f64, t0: f64) -> Result<Model> {
    params.reject_unknown(id.param_names())?;
    let natural = [Boundary::Natural, Boundary::Natural];
    let (spec, kernel, stationary, analytic_dt): (
        DiffusionSpec,
        Arc<dyn TransitionKernel>,
        Option<StationaryLaw>,
        bool,
    ) = match id {
        ModelId::Bm => (
            DiffusionSpec {
                drift: coefficient(|_, _| 0.0),
                diffusion: coefficient(|_, _| 1.0),
                interval: Interval::REAL_LINE,
                boundaries: natural,
                params: params.clone(),
            },
            Arc::new(GaussianKernel::brownian(0.0, 1.0)),
            None,
            true,
        ),
        ModelId::BmDrift => {
            let mu = params.get("mu")?;
            let sigma = positive(params, "sigma")?;
            (
                DiffusionSpec {
                    drift: coefficient(move |_, _| mu),
                    diffusion: coefficient(move |_, _| sigma),
                    interval: Interval::REAL_LINE,
                    boundaries: natural,
                    params: params.clone(),
                },
                Arc::new(GaussianKernel::brownian(mu, sigma)),
                None,
                true,
            )
        }
        ModelId::Gbm => {
            // Y = exp(μt + σB): dY = (μ + σ²/2) Y dt + σ Y dB.
            let mu = params.get("mu")?;
            let sigma = positive(params, "sigma")?;
            (
                DiffusionSpec {
                    drift: coefficient(move |x, _| (mu + 0.5 * sigma * sigma) * x),
                    diffusion: coefficient(move |x, _| sigma * x),
                    interval: Interval::POSITIVE,
                    boundaries: natural,
                    params: params.clone(),
                },
                Arc::new(LogNormalKernel::new(mu, sigma)),
                None,
                false,
            )
        }
        ModelId::Ou => {
            let alpha = params.get("alpha")?;
            let beta = params.get("beta")?;
            let sigma = positive(params, "sigma")?;
            let stationary = (alpha > 0.0).then(|| StationaryLaw::Gaussian {
                mean: beta / alpha,
                sd: sigma / (2.0 * alpha).sqrt(),
            });
            (
                DiffusionSpec {
                    drift: coefficient(move |x, _| -alpha * x + beta),
                    diffusion: coefficient(move |_, _| sigma),
                    interval: Interval::REAL_LINE,
                    boundaries: natural,
                    params: params.clone(),
                },
                Arc::new(GaussianKernel::ornstein_uhlenbeck(alpha, beta, sigma)),
                stationary,
                true,
            )
        }
        ModelId::Rbm => (
            DiffusionSpec {
                drift: coefficient(|_, _| 0.0),
                diffusion: coefficient(|_, _| 1.0),
                interval: Interval::POSITIVE,
                boundaries: [Boundary::RegularReflecting, Boundary::Natural],
                params: params.clone(),
            },
            Arc::new(ReflectedBmKernel),
            None,
            true,
        ),
        ModelId::Cir | ModelId::CirSpecial => {
            let alpha = params.get("alpha")?;
            let sigma = positive(params, "sigma")?;
            let beta = if id == ModelId::Cir {
                positive(params, "beta")?
            } else {
                0.25 * sigma * sigma
            };
            cir_parts(alpha, beta, sigma, params)?
        }
        ModelId::Rayleigh => {
            let a = params.get("a")?;
            let b = params.get("b")?;
            if a <= -0.5 {
                return Err(Error::param("a", format!("must exceed -1/2, got {a}")));
            }
            // Y = sqrt(X) with X a CIR(α = -2b, β = 2a + 1, σ = 2).
            let inner = CirKernel::new(-2.0 * b, 2.0 * a + 1.0, 2.0)?;
            let gamma = 2.0 * a + 1.0;
            (
                DiffusionSpec {
                    drift: coefficient(move |y, _| a / y + b * y),
                    diffusion: coefficient(|_, _| 1.0),
                    interval: Interval::POSITIVE,
                    boundaries: [lower_cir_boundary(gamma), Boundary::Natural],
                    params: params.clone(),
                },
                Arc::new(SqrtKernel::new(inner)),
                None,
                false,
            )
        }
        ModelId::Bessel => {
            let delta = params.get("delta")?;
            if delta <= -0.5 {
                return Err(Error::param("delta", format!("must exceed -1/2, got {delta}")));
            }
            let inner = CirKernel::new(0.0, 2.0 * delta + 1.0, 2.0)?;
            (
                DiffusionSpec {
                    drift: coefficient(move |z, _| delta / z),
                    diffusion: coefficient(|_, _| 1.0),
                    interval: Interval::POSITIVE,
                    boundaries: [lower_cir_boundary(2.0 * delta + 1.0), Boundary::Natural],
                    params: params.clone(),
                },
                Arc::new(SqrtKernel::new(inner)),
                None,
                false,
            )
        }
    };
    check_initial(&spec, x0, t0)?;
    Ok(Model {
        label: id.as_str().to_string(),
        id: Some(id),
        spec,
        kernel,
        stationary,
        x0,
        t0,
        analytic_dt,
    })
}

fn lower_cir_boundary(gamma: f64) -> Boundary {
    if gamma >= 2.0 {
        Boundary::Entrance
    } else {
        Boundary::RegularReflecting
    }
}

type Parts = (DiffusionSpec, Arc<dyn TransitionKernel>, Option<StationaryLaw>, bool);

fn cir_parts(alpha: f64, beta: f64, sigma: f64, params: &Params) -> Result<Parts> {
    let gamma = 4.0 * beta / (sigma * sigma);
    let stationary = (alpha > 0.0).then(|| StationaryLaw::Gamma {
        shape: 0.5 * gamma,
        scale: sigma * sigma / (2.0 * alpha),
    });
    Ok((
        DiffusionSpec {
            drift: coefficient(move |x, _| -alpha * x + beta),
            diffusion: coefficient(move |x, _| sigma * x.max(0.0).sqrt()),
            interval: Interval::POSITIVE,
            boundaries: [lower_cir_boundary(gamma), Boundary::Natural],
            params: params.clone(),
        },
        Arc::new(CirKernel::new(alpha, beta, sigma)?),
        stationary,
        false,
    ))
}

/// Convenience: parse the id and build the model.
pub fn make_model_by_name(name: &str, params: &Params, x0: f64, t0: f64) -> Result<Model> {
    make_model(name.parse()?, params, x0, t0)
}
