//! New diffusions from a source copula and prescribed marginals.
//!
//! `Z_t = [F^Z_t]⁻¹(F^X_t(X_t))` keeps the copula of `X` (the map is increasing
//! in `x` at every `t`) while giving `Z` the marginals `F^Z_t`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::special_fn::roots::invert_increasing;
use crate::special_fn::Tolerance;
use crate::uniformize::{path_rng, simulate_paths, PathEnsemble};

/// Time-invariant cdf given by a table, interpolated with a monotone cubic
/// (Fritsch–Carlson) so that density and quantile are well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCdf {
    /// `xs` and `ps` strictly increasing, `ps` within `[0, 1]`.
    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        if xs.len() != ps.len() || xs.len() < 2 {
            return Err(Error::domain(
                "cdf table needs at least two (x, p) rows of equal length",
            ));
        }
        if xs.iter().chain(&ps).any(|v| !v.is_finite()) {
            return Err(Error::domain("cdf table entries must be finite"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("cdf table x values must be strictly increasing"));
        }
        if ps.windows(2).any(|w| !(w[0] < w[1])) || ps[0] < 0.0 || ps[ps.len() - 1] > 1.0 {
            return Err(Error::domain(
                "cdf table probabilities must increase strictly within [0, 1]; the cdf is not invertible",
            ));
        }
        let n = xs.len();
        let secant: Vec<f64> = (0..n - 1).map(|i| (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secant[0];
        slopes[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            slopes[i] = 0.5 * (secant[i - 1] + secant[i]);
        }
        for i in 0..n - 1 {
            let a = slopes[i] / secant[i];
            let b = slopes[i + 1] / secant[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * secant[i];
                slopes[i + 1] = tau * b * secant[i];
            }
        }
        Ok(Self { xs, ps, slopes })
    }

    /// Parse `x,p` lines; `#` starts a comment.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (x, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected `x,p`, got `{line}`")))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
            xs.push(num(x)?);
            ps.push(num(p)?);
        }
        Self::new(xs, ps)
    }

    fn segment(&self, x: f64) -> usize {
        self.xs
            .partition_point(|&v| v <= x)
            .saturating_sub(1)
            .min(self.xs.len() - 2)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return if x < self.xs[0] { 0.0 } else { self.ps[0] };
        }
        if x >= self.xs[last] {
            return if x > self.xs[last] { 1.0 } else { self.ps[last] };
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.ps[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.ps[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1]
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > self.xs[self.xs.len() - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) / h * self.ps[i]
            + (3.0 * s2 - 4.0 * s + 1.0) * self.slopes[i]
            + (-6.0 * s2 + 6.0 * s) / h * self.ps[i + 1]
            + (3.0 * s2 - 2.0 * s) * self.slopes[i + 1]
    }

    /// Quantile; probabilities outside the tabulated range map to the end points.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let last = self.xs.len() - 1;
        if p <= self.ps[0] {
            return Ok(self.xs[0]);
        }
        if p >= self.ps[last] {
            return Ok(self.xs[last]);
        }
        let i = self.ps.partition_point(|&q| q <= p).saturating_sub(1).min(last - 1);
        let guess = self.xs[i] + (p - self.ps[i]) / (self.ps[i + 1] - self.ps[i]) * (self.xs[i + 1] - self.xs[i]);
        invert_increasing(
            |x| (self.cdf(x), Some(self.pdf(x))),
            p,
            guess,
            0.25 * (self.xs[i + 1] - self.xs[i]),
            self.xs[i],
            self.xs[i + 1],
            &Tolerance::quantile(),
        )
    }
}

/// Marginal family `F^Z_t` imposed on the recombined process.
#[derive(Debug, Clone)]
pub enum TargetMarginal {
    /// The marginals of a catalog model from its own `(x0, t0)`.
    Model(Model),
    /// Uniform on `(0, 1)` at every time.
    Uniform,
    /// The same tabulated law at every time.
    Table(TabulatedCdf),
}

impl TargetMarginal {
    pub fn cdf(&self, t: f64, z: f64) -> Result<f64> {
        Ok(match self {
            TargetMarginal::Model(m) => m.marginal(t)?.cdf(z),
            TargetMarginal::Uniform => z.clamp(0.0, 1.0),
            TargetMarginal::Table(tab) => tab.cdf(z),
        })
    }

    pub fn pdf(&self, t: f64, z: f64) -> Result<f64> {
        Ok(match self {
            TargetMarginal::Model(m) => m.marginal(t)?.pdf(z),
            TargetMarginal::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
            TargetMarginal::Table(tab) => tab.pdf(z),
        })
    }

    pub fn quantile(&self, t: f64, p: f64) -> Result<f64> {
        match self {
            TargetMarginal::Model(m) => m.marginal(t)?.quantile(p),
            TargetMarginal::Uniform => Ok(p),
            TargetMarginal::Table(tab) => tab.quantile(p),
        }
    }
}

/// `Z_t = [F^Z_t]⁻¹(F^X_t(X_t))`.
#[derive(Debug, Clone)]
pub struct RecombinedProcess {
    source: Model,
    target: TargetMarginal,
}

impl RecombinedProcess {
    pub fn source(&self) -> &Model {
        &self.source
    }

    pub fn target(&self) -> &TargetMarginal {
        &self.target
    }

    /// The pointwise map `x ↦ z` at time `t`.
    pub fn map(&self, t: f64, x: f64) -> Result<f64> {
        let p = self.source.marginal(t)?.cdf(x);
        self.target.quantile(t, p)
    }

    /// Inverse map `z ↦ x` at time `t`.
    pub fn inverse_map(&self, t: f64, z: f64) -> Result<f64> {
        let p = self.target.cdf(t, z)?;
        self.source.marginal(t)?.quantile(p)
    }

    /// Transition density of `Z` by the monotone pushforward formula.
    pub fn transition_pdf(&self, s: f64, z0: f64, t: f64, z: f64) -> Result<f64> {
        let x0 = self.inverse_map(s, z0)?;
        let x = self.inverse_map(t, z)?;
        let fx = self.source.transition_pdf(s, x0, t, x)?;
        let jac = self.source.marginal(t)?.pdf(x) / self.target.pdf(t, z)?;
        Ok(fx / jac)
    }

    /// Whether the map is nondecreasing over `xs` (sorted) at time `t`.
    pub fn is_monotone_on(&self, t: f64, xs: &[f64]) -> Result<bool> {
        let zs = xs.iter().map(|&x| self.map(t, x)).collect::<Result<Vec<_>>>()?;
        Ok(zs.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Exact `Z` paths: exact `X` paths mapped pointwise.
    pub fn simulate(&self, times: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
        let mut ens = simulate_paths(&self.source, times, n_paths, seed)?;
        let k = times.len();
        ens.values.par_chunks_mut(k).try_for_each(|row| -> Result<()> {
            for (x, &t) in row.iter_mut().zip(times) {
                *x = self.map(t, *x)?;
            }
            Ok(())
        })?;
        Ok(ens)
    }
}

/// Recombine the copula of `source` with the `target` marginals.
pub fn recombine(source: &Model, target: TargetMarginal) -> Result<RecombinedProcess> {
    if let TargetMarginal::Model(m) = &target {
        if m.t0() > source.t0() {
            return Err(Error::domain(format!(
                "target marginals start at t0 = {}, after the source start {}",
                m.t0(),
                source.t0()
            )));
        }
    }
    Ok(RecombinedProcess {
        source: source.clone(),
        target,
    })
}

/// What the first-passage sampler runs on.
#[derive(Debug, Clone, Copy)]
pub enum FptSource<'a> {
    Model(&'a Model),
    Recombined(&'a RecombinedProcess),
}

/// First grid times at or above a threshold; `None` marks a censored path.
#[derive(Debug, Clone, PartialEq)]
pub struct FptSample {
    pub t_max: f64,
    pub times: Vec<Option<f64>>,
}

impl FptSample {
    pub fn hits(&self) -> Vec<f64> {
        self.times.iter().flatten().copied().collect()
    }

    pub fn censored(&self) -> usize {
        self.times.iter().filter(|t| t.is_none()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.times {
            match t {
                Some(t) => writeln!(w, "{t}")?,
                None => writeln!(w, ">{}", self.t_max)?,
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut t_max = None;
        let mut times = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
            if let Some(rest) = line.strip_prefix('>') {
                let v = num(rest)?;
                if t_max.is_some_and(|m| m != v) {
                    return Err(Error::Parse("inconsistent censoring horizons".into()));
                }
                t_max = Some(v);
                times.push(None);
            } else {
                times.push(Some(num(line)?));
            }
        }
        let t_max = t_max
            .or_else(|| times.iter().flatten().copied().reduce(f64::max))
            .unwrap_or(0.0);
        Ok(Self { t_max, times })
    }
}

/// First passage through `threshold` on the grid `t0 + dt, t0 + 2dt, … ≤ t_max`,
/// with exact transition sampling between grid points.
///
/// `reset` restarts a model source from that state at its `t0`; it is not
/// available for recombined sources, whose start is fixed by both laws.
pub fn first_passage_times(
    source: FptSource<'_>,
    threshold: f64,
    reset: Option<f64>,
    t_max: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<FptSample> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    if threshold.is_nan() {
        return Err(Error::param("threshold", "must not be NaN"));
    }
    let model = match (source, reset) {
        (FptSource::Model(m), Some(x)) => m.restarted(x, m.t0())?,
        (FptSource::Model(m), None) => m.clone(),
        (FptSource::Recombined(_), Some(_)) => {
            return Err(Error::param("reset", "not supported for recombined processes"));
        }
        (FptSource::Recombined(r), None) => r.source().clone(),
    };
    let t0 = model.t0();
    let steps = ((t_max - t0) / dt + 1e-9).floor();
    if !(steps >= 1.0) {
        return Err(Error::domain(format!(
            "t_max = {t_max} leaves no grid point after t0 = {t0}"
        )));
    }
    let steps = steps as usize;
    let recombined = match source {
        FptSource::Recombined(r) => Some(r),
        FptSource::Model(_) => None,
    };
    let times = (0..n_paths)
        .into_par_iter()
        .map(|p| -> Result<Option<f64>> {
            let mut rng = path_rng(seed, p);
            let (mut s, mut x) = (t0, model.x0());
            for i in 1..=steps {
                let t = t0 + i as f64 * dt;
                x = model.sample_transition(s, x, t, &mut rng)?;
                let level = match recombined {
                    Some(r) => r.map(t, x)?,
                    None => x,
                };
                if level >= threshold {
                    return Ok(Some(t));
                }
                s = t;
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FptSample { t_max, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, ModelId, Params};

    fn ou() -> Model {
        let p = Params::new().with("alpha", 0.1).with("beta", 0.0).with("sigma", 1.0);
        make_model(ModelId::Ou, &p, 0.0, 0.0).unwrap()
    }

    #[test]
    fn own_marginals_give_identity_map() {
        let m = ou();
        let r = recombine(&m, TargetMarginal::Model(m.clone())).unwrap();
        for &x in &[-2.0, 0.1, 1.7] {
            assert!((r.map(1.5, x).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_cubic_table() {
        let xs: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
        let ps: Vec<f64> = xs.iter().map(|&x| crate::special_fn::big_phi(x)).collect();
        let tab = TabulatedCdf::new(xs, ps).unwrap();
        for &x in &[-3.3, -0.1, 0.0, 2.2] {
            let err = (tab.cdf(x) - crate::special_fn::big_phi(x)).abs();
            assert!(err < 2e-5, "x = {x}, err = {err}");
            let q = tab.quantile(tab.cdf(x)).unwrap();
            assert!((q - x).abs() < 1e-9);
        }
        let mut prev = 0.0;
        for i in 0..=400 {
            let c = tab.cdf(-4.0 + 0.02 * i as f64);
            assert!(c >= prev);
            prev = c;
        }
        assert!(TabulatedCdf::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.1, 0.9]).is_err());
        assert!(TabulatedCdf::parse_csv("# x,p\n0,0\n1,0.5\n2,1\n").is_ok());
    }

    #[test]
    fn fpt_trivial_cases() {
        let m = ou();
        let below = first_passage_times(FptSource::Model(&m), -1.0, None, 1.0, 0.1, 5, 3).unwrap();
        assert!(below.times.iter().all(|t| *t == Some(0.1)));
        let never = first_passage_times(FptSource::Model(&m), 1e10, None, 1.0, 0.1, 5, 3).unwrap();
        assert_eq!(never.censored(), 5);
        assert!(never.to_csv().lines().all(|l| l == ">1"));
        assert_eq!(FptSample::parse_csv(&never.to_csv()).unwrap(), never);
        assert!(first_passage_times(FptSource::Model(&m), 1.0, None, 1.0, 0.0, 5, 3).is_err());
        assert!(first_passage_times(FptSource::Model(&m), 1.0, None, 1.0, 0.1, 0, 3).is_err());
        let r = recombine(&m, TargetMarginal::Uniform).unwrap();
        assert!(first_passage_times(FptSource::Recombined(&r), 0.9, Some(0.0), 1.0, 0.1, 5, 3).is_err());
    }
}
