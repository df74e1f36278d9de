//! Kernels built from the normal law: drifted BM, OU, GBM and reflected BM.

use super::TransitionKernel;
use crate::error::Result;
use crate::special_fn::roots::invert_increasing;
use crate::special_fn::{big_phi, big_phi_c, clamp_prob, expm1_ratio, phi, phi_inv, Tolerance};

/// `dX = (β - αX) dt + σ dB`; `α = 0` gives Brownian motion with drift `β`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    alpha: f64,
    beta: f64,
    sigma: f64,
}

impl GaussianKernel {
    pub fn brownian(mu: f64, sigma: f64) -> Self {
        Self {
            alpha: 0.0,
            beta: mu,
            sigma,
        }
    }

    pub fn ornstein_uhlenbeck(alpha: f64, beta: f64, sigma: f64) -> Self {
        Self { alpha, beta, sigma }
    }

    /// Conditional mean and standard deviation after an elapsed time `dt`.
    pub fn moments(&self, y: f64, dt: f64) -> (f64, f64) {
        let decay = (-self.alpha * dt).exp();
        let mean = y * decay + self.beta * expm1_ratio(-self.alpha, dt);
        let var = self.sigma * self.sigma * expm1_ratio(-2.0 * self.alpha, dt);
        (mean, var.sqrt())
    }
}

impl TransitionKernel for GaussianKernel {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (m, sd) = self.moments(y, t - s);
        phi((x - m) / sd) / sd
    }

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (m, sd) = self.moments(y, t - s);
        big_phi((x - m) / sd)
    }

    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (m, sd) = self.moments(y, t - s);
        big_phi_c((x - m) / sd)
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        let (m, sd) = self.moments(y, t - s);
        Ok(m + sd * phi_inv(clamp_prob(p)))
    }

    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (m, sd) = self.moments(y, t - s);
        let z = (x - m) / sd;
        -z * phi(z) / (sd * sd)
    }

    fn cdf_dt(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let dt = t - s;
        let (m, sd) = self.moments(y, dt);
        let decay = (-self.alpha * dt).exp();
        let dm = decay * (self.beta - self.alpha * y);
        let dsd = self.sigma * self.sigma * decay * decay / (2.0 * sd);
        let z = (x - m) / sd;
        -phi(z) * (dm + z * dsd) / sd
    }
}

/// `X = y exp(μ(t - s) + σ(B_t - B_s))`.
#[derive(Debug, Clone, Copy)]
pub struct LogNormalKernel {
    mu: f64,
    sigma: f64,
}

impl LogNormalKernel {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self { mu, sigma }
    }

    fn standardize(&self, s: f64, y: f64, t: f64, x: f64) -> (f64, f64) {
        let dt = t - s;
        let sd = self.sigma * dt.sqrt();
        ((x.ln() - y.ln() - self.mu * dt) / sd, sd)
    }
}

impl TransitionKernel for LogNormalKernel {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (z, sd) = self.standardize(s, y, t, x);
        phi(z) / (sd * x)
    }

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        big_phi(self.standardize(s, y, t, x).0)
    }

    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        big_phi_c(self.standardize(s, y, t, x).0)
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        let dt = t - s;
        Ok(y * (self.mu * dt + self.sigma * dt.sqrt() * phi_inv(clamp_prob(p))).exp())
    }

    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (z, sd) = self.standardize(s, y, t, x);
        -phi(z) / (sd * x * x) * (1.0 + z / sd)
    }
}

/// Brownian motion reflected at the origin, `X = |y + B|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReflectedBmKernel;

impl ReflectedBmKernel {
    fn scaled(s: f64, y: f64, t: f64, x: f64) -> (f64, f64, f64) {
        let sd = (t - s).sqrt();
        ((x - y) / sd, (x + y) / sd, sd)
    }
}

impl TransitionKernel for ReflectedBmKernel {
    fn pdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let (a, b, sd) = Self::scaled(s, y, t, x);
        (phi(a) + phi(b)) / sd
    }

    fn cdf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (a, b, _) = Self::scaled(s, y, t, x);
        if a < 0.0 {
            (big_phi(a) - big_phi(-b)).max(0.0)
        } else {
            1.0 - big_phi_c(a) - big_phi_c(b)
        }
    }

    fn sf(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let (a, b, _) = Self::scaled(s, y, t, x);
        big_phi_c(a) + big_phi_c(b)
    }

    fn quantile(&self, s: f64, y: f64, t: f64, p: f64) -> Result<f64> {
        let p = clamp_prob(p);
        let sd = (t - s).sqrt();
        let guess = (y + sd * phi_inv(p)).max(sd * phi_inv(0.5 + 0.5 * p));
        let tol = Tolerance::quantile();
        if p <= 0.5 {
            invert_increasing(
                |x| (self.cdf(s, y, t, x), Some(self.pdf(s, y, t, x))),
                p,
                guess,
                0.25 * sd,
                0.0,
                f64::INFINITY,
                &tol,
            )
        } else {
            invert_increasing(
                |x| (-self.sf(s, y, t, x), Some(self.pdf(s, y, t, x))),
                p - 1.0,
                guess,
                0.25 * sd,
                0.0,
                f64::INFINITY,
                &tol,
            )
        }
    }

    fn pdf_dx(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let (a, b, sd) = Self::scaled(s, y, t, x);
        -(a * phi(a) + b * phi(b)) / (sd * sd)
    }

    fn cdf_dt(&self, s: f64, y: f64, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (a, b, _) = Self::scaled(s, y, t, x);
        -(a * phi(a) + b * phi(b)) / (2.0 * (t - s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_dt(k: &dyn TransitionKernel, s: f64, y: f64, t: f64, x: f64) -> f64 {
        let h = 1e-5;
        (k.cdf(s, y, t + h, x) - k.cdf(s, y, t - h, x)) / (2.0 * h)
    }

    #[test]
    fn ou_moments_match_closed_form() {
        let k = GaussianKernel::ornstein_uhlenbeck(0.5, 1.0, 0.8);
        let (m, sd) = k.moments(3.0, 2.0);
        let e = (-1.0f64).exp();
        assert!((m - (3.0 * e + 2.0 * (1.0 - e))).abs() < 1e-14);
        assert!((sd * sd - 0.64 * (1.0 - e * e)).abs() < 1e-14);
        let bm = GaussianKernel::brownian(0.3, 2.0);
        let (m, sd) = bm.moments(1.0, 4.0);
        assert!((m - 2.2).abs() < 1e-14 && (sd - 4.0).abs() < 1e-14);
    }

    #[test]
    fn analytic_time_derivatives() {
        let ou = GaussianKernel::ornstein_uhlenbeck(0.7, -0.2, 1.3);
        let rbm = ReflectedBmKernel;
        for &x in &[-1.0, 0.2, 1.5] {
            let a = ou.cdf_dt(0.5, 0.3, 2.0, x);
            assert!((a - fd_dt(&ou, 0.5, 0.3, 2.0, x)).abs() < 1e-8);
            let xr = x.abs();
            let a = rbm.cdf_dt(0.0, 0.4, 1.5, xr);
            assert!((a - fd_dt(&rbm, 0.0, 0.4, 1.5, xr)).abs() < 1e-8);
        }
    }

    #[test]
    fn reflected_quantile_round_trip() {
        for &y in &[0.0, 0.5, 3.0] {
            for &p in &[1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
                let x = ReflectedBmKernel.quantile(0.0, y, 2.0, p).unwrap();
                let back = if p < 0.5 {
                    ReflectedBmKernel.cdf(0.0, y, 2.0, x)
                } else {
                    1.0 - ReflectedBmKernel.sf(0.0, y, 2.0, x)
                };
                assert!((back - p).abs() < 1e-12 * p.max(1e-3), "y={y} p={p}");
            }
        }
    }

    #[test]
    fn lognormal_density_derivative() {
        let k = LogNormalKernel::new(0.1, 0.4);
        let h = 1e-6;
        let fd = (k.pdf(0.0, 1.0, 1.0, 1.3 + h) - k.pdf(0.0, 1.0, 1.0, 1.3 - h)) / (2.0 * h);
        assert!((fd - k.pdf_dx(0.0, 1.0, 1.0, 1.3)).abs() < 1e-7);
    }
}
