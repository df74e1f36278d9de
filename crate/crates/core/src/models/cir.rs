//! Square-root diffusions: CIR and its square-root transforms.
//!
//! Given `X_s = y`, the scaled value `2c X_t` is noncentral chi-square with
//! `γ = 4β/σ²` degrees of freedom and noncentrality `2c e^{-αΔ} y`, where
//! `c = 2 / (σ² g(Δ))` and `g(Δ) = (1 - e^{-αΔ})/α`. The `α → 0` limit is
//! `g(Δ) = Δ`, which covers squared Bessel processes.

use rand::RngCore;

use super::TransitionKernel;
use crate::error::{Error, Result};
use crate::special_fn::{chi2nc_cdf_unchecked, chi2nc_pdf_unchecked, chi2nc_quantile_unchecked, expm1_ratio};

/// `dX = (β - αX) dt + σ √X dB` on `[0, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct CirKernel {
    alpha: f64,
    sigma: f64,
    gamma: f64,
}

impl CirKernel {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("must be positive, got {beta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            alpha,
            sigma,
            gamma: 4.0 * beta / (sigma * sigma),
        })
    }

    /// Degrees of freedom `γ = 4β/σ²`.
    pub fn dof(&self) -> f64 {
        self.gamma
    }

    /// Scale `2c` and noncentrality for a step of length `dt` from `y`.
    pub fn scaling(&self, y: f64, dt: f64) -> (f64, f64) {
        let two_c = 4.0 / (self.sigma * self.sigma * expm1_ratio(-self.alpha, dt));
        (two_c, two_c * (-self.alpha * dt).exp() * y.max(0.0))
    }
}

impl TransitionKernel for CirKernel {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let (k, lambda) = self.scaling(y, t - s);
        k * chi2nc_pdf_unchecked(k * x, self.gamma, lambda)
    }

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (k, lambda) = self.scaling(y, t - s);
        let (lo, up) = chi2nc_cdf_unchecked(k * x, self.gamma, lambda);
        if lo < 0.5 {
            lo
        } else {
            1.0 - up
        }
    }

    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (k, lambda) = self.scaling(y, t - s);
        let (lo, up) = chi2nc_cdf_unchecked(k * x, self.gamma, lambda);
        if up < 0.5 {
            up
        } else {
            1.0 - lo
        }
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        let (k, lambda) = self.scaling(y, t - s);
        Ok(chi2nc_quantile_unchecked(p, self.gamma, lambda)? / k)
    }

    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (k, lambda) = self.scaling(y, t - s);
        k * k * crate::special_fn::chi2nc_pdf_dz(k * x, self.gamma, lambda).unwrap_or(f64::NAN)
    }
}

/// `Y = √X` for a CIR kernel `X`.
#[derive(Debug, Clone, Copy)]
pub struct SqrtKernel {
    inner: CirKernel,
}

impl SqrtKernel {
    pub fn new(inner: CirKernel) -> Self {
        Self { inner }
    }
}

impl TransitionKernel for SqrtKernel {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        2.0 * x * self.inner.pdf(s, y * y, t, x * x)
    }

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.inner.cdf(s, y * y, t, x * x)
    }

    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        self.inner.sf(s, y * y, t, x * x)
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        Ok(self.inner.quantile(s, y * y, t, p)?.sqrt())
    }

    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let x2 = x * x;
        2.0 * self.inner.pdf(s, y * y, t, x2) + 4.0 * x2 * self.inner.pdf_dx(s, y * y, t, x2)
    }

    fn sample(&self, s: f64, y: f64, t: f64, rng: &mut dyn RngCore) -> Result<f64> {
        Ok(self.inner.sample(s, y * y, t, rng)?.sqrt())
    }
}
