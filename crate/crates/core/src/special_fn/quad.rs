//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Infinite ranges are folded onto finite ones with `x = a + (1 - u)/u`
//! (semi-infinite) or split at zero (doubly infinite).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Accuracy targets for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: abs_tol,
            ..Self::default()
        }
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    (value, error)
}

fn integrate_finite<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    adaptive(f, &[a, b], opts)
}

/// Adaptive refinement starting from the partition given by sorted `breaks`.
fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (value, error) = gk15(f, w[0], w[1]);
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
        total += value;
        total_err += error;
    }
    let mut n = heap.len();
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if n >= opts.max_intervals {
            return Err(Error::Convergence {
                what: "adaptive quadrature",
                achieved: total_err,
                iterations: n,
            });
        }
        let seg = heap.pop().expect("heap never empties");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point.
            heap.push(Segment { error: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.error).sum();
            if heap.iter().all(|s| s.error == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        n += 1;
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error })
}

/// Integrate `f` over `[breaks[0], breaks[last]]`, starting the adaptive
/// refinement from the given partition. Breakpoints must be finite and
/// nondecreasing; use them to make sure narrow features are seen.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    if breaks.len() < 2 || breaks.iter().any(|x| !x.is_finite()) || breaks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain(
            "breakpoints must be finite, nondecreasing and at least two",
        ));
    }
    let mut pts = breaks.to_vec();
    pts.dedup();
    if pts.len() < 2 {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    adaptive(&f, &pts, opts)
}

/// Integrate `f` over `[a, b]`; either bound may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::domain("integration bounds must not be NaN"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if a > b {
        let r = integrate_dyn(f, b, a, opts)?;
        return Ok(QuadResult {
            value: -r.value,
            error: r.error,
        });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_finite(f, a, b, opts),
        (true, false) => {
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = a + (1.0 - u) / u;
                let v = f(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            integrate_finite(&g, 0.0, 1.0, opts)
        }
        (false, true) => {
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = b - (1.0 - u) / u;
                let v = f(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            integrate_finite(&g, 0.0, 1.0, opts)
        }
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, opts)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, opts)?;
            Ok(QuadResult {
                value: left.value + right.value,
                error: left.error + right.error,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let opts = QuadOptions::default();
        for k in 0..20 {
            let r = integrate(|x: f64| x.powi(k), 0.0, 1.0, &opts).unwrap();
            assert!((r.value - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(
            |x: f64| (-x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &QuadOptions::tol(1e-12),
        )
        .unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadOptions::tol(1e-9)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn breakpoints_expose_narrow_peaks() {
        let (c, w) = (0.3137, 2e-3);
        let f = |x: f64| (-0.5 * ((x - c) / w).powi(2)).exp();
        let exact = w * (2.0 * std::f64::consts::PI).sqrt();
        let mut breaks: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        breaks.push(c);
        breaks.sort_by(f64::total_cmp);
        let r = integrate_breaks(f, &breaks, &QuadOptions::default()).unwrap();
        assert!(
            (r.value - exact).abs() < 1e-12 * exact.max(1.0),
            "{} vs {exact}",
            r.value
        );
        let blind = integrate_breaks(f, &[-10.0, 10.0], &QuadOptions::default()).unwrap();
        assert!(blind.value < 0.5 * exact);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x: f64| x, 1.0, 0.0, &QuadOptions::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }
}
