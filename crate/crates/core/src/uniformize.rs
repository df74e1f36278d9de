//! The uniformized process `X̃_t = F_t(X_t)`.
//!
//! Coefficients of its SDE, the backward-equation residual of copula
//! conditionals, exact simulation and empirical copulas.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::CopulaSurface;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::special_fn::check_open_unit;

/// Coefficients `(ũ, σ̃)` of the uniformized SDE, bound to one model and
/// therefore to one initial condition `(x0, t0)`.
#[derive(Debug, Clone)]
pub struct UniformizedCoefficients {
    model: Model,
}

impl UniformizedCoefficients {
    pub fn new(model: &Model) -> Self {
        Self { model: model.clone() }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// `ũ = ∂_s F_s + μ f_s + ½σ² f_s'`, `σ̃ = σ f_s`, all at `x = F_s⁻¹(u)`.
    pub fn at(&self, u: f64, s: f64) -> Result<(f64, f64)> {
        if u <= 0.0 || u >= 1.0 {
            return Err(Error::domain(format!(
                "uniformized coefficients need u in (0, 1), got {u}"
            )));
        }
        let m = self.model.marginal(s)?;
        let x = m.quantile(u)?;
        let spec = self.model.spec();
        let (mu, sigma) = (spec.drift(x, s), spec.diffusion(x, s));
        let f = m.pdf(x);
        let drift = m.cdf_dt(x) + mu * f + 0.5 * sigma * sigma * m.pdf_dx(x);
        Ok((drift, sigma * f))
    }
}

/// `(ũ, σ̃)` at `(u, s)` for the model restarted from `(x0, t0)`.
pub fn uniformized_coefficients(model: &Model, x0: f64, t0: f64, u: f64, s: f64) -> Result<(f64, f64)> {
    UniformizedCoefficients::new(&model.restarted(x0, t0)?).at(u, s)
}

/// Time-homogeneous coefficients under the stationary law `g`:
/// `ũ = μ g + ½σ² g'`, `σ̃ = σ g` at `x = G⁻¹(u)`.
pub fn stationary_uniformized_coefficients(model: &Model, u: f64) -> Result<(f64, f64)> {
    check_open_unit("u", u)?;
    let law = model
        .stationary()
        .ok_or_else(|| Error::domain(format!("{} has no stationary law", model.label())))?;
    let x = law.quantile(u)?;
    let spec = model.spec();
    let (mu, sigma) = (spec.drift(x, 0.0), spec.diffusion(x, 0.0));
    let g = law.pdf(x);
    Ok((mu * g + 0.5 * sigma * sigma * law.pdf_dx(x), sigma * g))
}

/// Builds the surface `c_{s,t}` for a varying `s` at fixed `t`.
pub type SurfaceAt = Arc<dyn Fn(f64) -> Result<CopulaSurface> + Send + Sync>;

/// Interior grid and finite-difference steps for the residual check.
#[derive(Debug, Clone, Copy)]
pub struct ResidualGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub h_u: f64,
    pub h_s: f64,
}

impl Default for ResidualGrid {
    fn default() -> Self {
        Self {
            lo: 0.1,
            hi: 0.9,
            points: 9,
            h_u: 1e-3,
            h_s: 1e-4,
        }
    }
}

impl ResidualGrid {
    fn nodes(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.lo < self.hi) {
            return Err(Error::domain("residual grid needs lo < hi and at least two points"));
        }
        if self.lo - self.h_u <= 0.0 || self.hi + self.h_u >= 1.0 {
            return Err(Error::domain(format!(
                "residual grid [{}, {}] with step {} touches the boundary",
                self.lo, self.hi, self.h_u
            )));
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lo + h * i as f64).collect())
    }
}

/// Outcome of [`kolmogorov_copula_residual`].
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// `max |∂_s C + ũ ∂_u C + ½σ̃² ∂²_u C|` over the grid.
    pub pde: f64,
    /// Defect of the terminal condition `C_{t|s}(v | u) → 1[u ≤ v]` as `s → t`:
    /// the largest of `C(u − 0.05 | u)` and `1 − C(u + 0.05 | u)` for
    /// `u ∈ {0.3, 0.5, 0.7}` at `t − s = 10⁻⁴ t`.
    pub terminal: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.pde.max(self.terminal)
    }
}

/// Check that `C_{t|s}(v | u)` solves the backward equation of the uniformized
/// process and meets its terminal condition.
pub fn kolmogorov_copula_residual(
    surface_at: &SurfaceAt,
    model: &Model,
    t: f64,
    s: f64,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    let nodes = grid.nodes()?;
    if !(s - grid.h_s > model.t0() && s + grid.h_s < t) {
        return Err(Error::domain(format!("need t0 < s ± h_s < t, got s = {s}, t = {t}")));
    }
    let coeffs = UniformizedCoefficients::new(model);
    let mid = surface_at(s)?;
    let early = surface_at(s - grid.h_s)?;
    let late = surface_at(s + grid.h_s)?;
    let h = grid.h_u;
    let mut pde: f64 = 0.0;
    for &u in &nodes {
        let (drift, diff) = coeffs.at(u, s)?;
        for &v in &nodes {
            let c0 = mid.conditional(u, v)?;
            let cp = mid.conditional(u + h, v)?;
            let cm = mid.conditional(u - h, v)?;
            let ds = (late.conditional(u, v)? - early.conditional(u, v)?) / (2.0 * grid.h_s);
            let du = (cp - cm) / (2.0 * h);
            let duu = (cp - 2.0 * c0 + cm) / (h * h);
            pde = pde.max((ds + drift * du + 0.5 * diff * diff * duu).abs());
        }
    }
    let near = surface_at(t - 1e-4 * t)?;
    let mut terminal: f64 = 0.0;
    for &u in &[0.3, 0.5, 0.7] {
        terminal = terminal
            .max(near.conditional(u, u - 0.05)?)
            .max(1.0 - near.conditional(u, u + 0.05)?);
    }
    Ok(ResidualReport { pde, terminal })
}

/// `∂_u C(v | u)` by central difference, for reflection checks near `u = 0`.
pub fn conditional_u_derivative(surface: &CopulaSurface, u: f64, v: f64) -> Result<f64> {
    let h = 0.5 * u.min(1.0 - u);
    Ok((surface.conditional(u + h, v)? - surface.conditional(u - h, v)?) / (2.0 * h))
}

/// Paths sampled at a common set of times; `values[p * times.len() + i]` is
/// path `p` at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub values: Vec<f64>,
}

impl PathEnsemble {
    pub fn path(&self, p: usize) -> &[f64] {
        let k = self.times.len();
        &self.values[p * k..(p + 1) * k]
    }

    /// Values of every path at `times[i]`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        let k = self.times.len();
        (0..self.n_paths).map(|p| self.values[p * k + i]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# paths={},seed={}", self.n_paths, self.seed)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for p in 0..self.n_paths {
                write!(w, ",{}", self.values[p * self.times.len() + i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty path file".into()))?;
        let rest = header
            .strip_prefix("# paths=")
            .ok_or_else(|| Error::Parse(format!("bad path header `{header}`")))?;
        let (n, seed) = rest
            .split_once(",seed=")
            .ok_or_else(|| Error::Parse(format!("bad path header `{header}`")))?;
        let n_paths: usize = n.parse().map_err(|e| Error::Parse(format!("path count: {e}")))?;
        let seed: u64 = seed.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?;
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{x}`: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != n_paths + 1 {
                return Err(Error::Parse(format!(
                    "row has {} columns, expected {}",
                    row.len(),
                    n_paths + 1
                )));
            }
            times.push(row[0]);
            rows.push(row);
        }
        let k = times.len();
        let mut values = vec![0.0; n_paths * k];
        for (i, row) in rows.iter().enumerate() {
            for p in 0..n_paths {
                values[p * k + i] = row[p + 1];
            }
        }
        Ok(Self {
            times,
            seed,
            n_paths,
            values,
        })
    }
}

/// Per-path generator: one ChaCha stream per path index under a common seed.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn check_times(model: &Model, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::domain("no sampling times given"));
    }
    if times[0] <= model.t0() {
        return Err(Error::domain(format!(
            "first sampling time {} must follow t0 = {}",
            times[0],
            model.t0()
        )));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("sampling times must be strictly increasing"));
    }
    Ok(())
}

/// Exact paths of `model` started at its `(x0, t0)`.
pub fn simulate_paths(model: &Model, times: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    check_times(model, times)?;
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    let k = times.len();
    let mut values = vec![0.0; n_paths * k];
    values
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(p, row)| -> Result<()> {
            let mut rng = path_rng(seed, p);
            let (mut s, mut x) = (model.t0(), model.x0());
            for (slot, &t) in row.iter_mut().zip(times) {
                x = model.sample_transition(s, x, t, &mut rng)?;
                *slot = x;
                s = t;
            }
            Ok(())
        })?;
    Ok(PathEnsemble {
        times: times.to_vec(),
        seed,
        n_paths,
        values,
    })
}

/// Exact paths of the uniformized process `F_t(X_t)`.
pub fn simulate_uniformized(model: &Model, times: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let mut ens = simulate_paths(model, times, n_paths, seed)?;
    let marginals = times.iter().map(|&t| model.marginal(t)).collect::<Result<Vec<_>>>()?;
    let k = times.len();
    ens.values.par_chunks_mut(k).for_each(|row| {
        for (x, m) in row.iter_mut().zip(&marginals) {
            *x = m.cdf(*x);
        }
    });
    Ok(ens)
}

/// Empirical copula of a sample of pairs in `[0, 1]²`.
#[derive(Debug, Clone)]
pub struct EmpiricalCopula {
    us: Vec<f64>,
    vs: Vec<f64>,
}

impl EmpiricalCopula {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("empirical copula of an empty sample"));
        }
        if pairs
            .iter()
            .any(|&(u, v)| !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)))
        {
            return Err(Error::domain("pairs must lie in [0, 1]²"));
        }
        Ok(Self {
            us: pairs.iter().map(|p| p.0).collect(),
            vs: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Pairs from two columns of an ensemble.
    pub fn from_columns(us: &[f64], vs: &[f64]) -> Result<Self> {
        if us.len() != vs.len() {
            return Err(Error::domain("columns differ in length"));
        }
        let pairs: Vec<(f64, f64)> = us.iter().copied().zip(vs.iter().copied()).collect();
        Self::new(&pairs)
    }

    /// Rank-based pseudo-observations `rank/(N + 1)` of arbitrary pairs.
    pub fn from_ranks(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::domain(
                "rank transform needs two non-empty columns of equal length",
            ));
        }
        let ranks = |col: &[f64]| {
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut r = vec![0.0; col.len()];
            let n1 = (col.len() + 1) as f64;
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = (rank + 1) as f64 / n1;
            }
            r
        };
        Self::from_columns(&ranks(xs), &ranks(ys))
    }

    pub fn len(&self) -> usize {
        self.us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.us.is_empty()
    }

    /// `Ĉ(u, v) = N⁻¹ Σ 1[u_i ≤ u, v_i ≤ v]`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let hits = self
            .us
            .iter()
            .zip(&self.vs)
            .filter(|&(&a, &b)| a <= u && b <= v)
            .count();
        hits as f64 / self.len() as f64
    }

    /// `Ĉ(i/k, j/k)` for `i, j = 0..=k`, as a `(k+1) × (k+1)` row-major table
    /// indexed `[i * (k + 1) + j]`.
    pub fn cdf_grid(&self, k: usize) -> Vec<f64> {
        let kk = k + 1;
        let mut counts = vec![0.0; kk * kk];
        for (&u, &v) in self.us.iter().zip(&self.vs) {
            // Bin b holds ((b − 1)/k, b/k]; bin 0 holds the value 0 itself.
            let bu = ((u * k as f64).ceil() as usize).min(k);
            let bv = ((v * k as f64).ceil() as usize).min(k);
            counts[bu * kk + bv] += 1.0;
        }
        for i in 0..kk {
            for j in 1..kk {
                counts[i * kk + j] += counts[i * kk + j - 1];
            }
        }
        for i in 1..kk {
            for j in 0..kk {
                counts[i * kk + j] += counts[(i - 1) * kk + j];
            }
        }
        let n = self.len() as f64;
        counts.iter().map(|c| c / n).collect()
    }

    /// `m × m` histogram density; row index is `v`, column index is `u`.
    pub fn binned_density(&self, m: usize) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(Error::param("m", "must be at least 1"));
        }
        let mut d = vec![0.0; m * m];
        let w = (m * m) as f64 / self.len() as f64;
        for (&u, &v) in self.us.iter().zip(&self.vs) {
            let i = ((v * m as f64) as usize).min(m - 1);
            let j = ((u * m as f64) as usize).min(m - 1);
            d[i * m + j] += w;
        }
        Ok(d)
    }
}
