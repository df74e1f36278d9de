//! Kolmogorov–Smirnov statistics used by the validation suites.

use crate::error::{Error, Result};

/// `sup_x |F_n(x) − F(x)|` for a sample against a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("KS statistic of an empty sample"));
    }
    let mut xs = samples.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("KS sample contains NaN"));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// KS distance of a sample from the uniform law on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> Result<f64> {
    ks_statistic(samples, |x| x.clamp(0.0, 1.0))
}

/// Two-sample statistic `sup_x |F_n(x) − G_m(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS statistic of an empty sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_grid_has_half_step_distance() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_uniform(&xs).unwrap() - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn two_sample_of_disjoint_sets_is_one() {
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&[0.5, 0.7], &[0.5, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(ks_uniform(&[]).is_err());
    }
}
