//! Bracketed inversion of monotone functions.
//!
//! The bracket grows geometrically from an initial guess until it encloses the
//! target, then a safeguarded Newton iteration takes over: any Newton step that
//! leaves the bracket (or has no usable derivative) is replaced by bisection.

use super::Tolerance;
use crate::error::{Error, Result};

/// Solve `f(x) = target` for a nondecreasing `f` on `[lower, upper]`.
///
/// `eval` returns the function value and, optionally, its derivative.
/// `guess` seeds the bracket and `step` is the initial half-width.
pub fn invert_increasing<F>(
    eval: F,
    target: f64,
    guess: f64,
    step: f64,
    lower: f64,
    upper: f64,
    tol: &Tolerance,
) -> Result<f64>
where
    F: Fn(f64) -> (f64, Option<f64>),
{
    if !target.is_finite() {
        return Err(Error::domain(format!("inversion target {target} is not finite")));
    }
    let mut step = if step > 0.0 && step.is_finite() { step } else { 1.0 };
    let mut x = guess.clamp(lower, upper);
    if !x.is_finite() {
        x = 0.0f64.clamp(lower, upper);
    }

    // Bracket.
    let (mut lo, mut hi) = (x, x);
    let (mut f_lo, _) = eval(lo);
    let mut f_hi = f_lo;
    let mut grow = 0;
    while f_lo > target {
        if lo <= lower {
            break;
        }
        hi = lo;
        f_hi = f_lo;
        lo = (lo - step).max(lower);
        f_lo = eval(lo).0;
        step *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::Convergence {
                what: "bracket search (downward)",
                achieved: f_lo - target,
                iterations: grow,
            });
        }
    }
    while f_hi < target {
        if hi >= upper {
            break;
        }
        lo = hi;
        f_lo = f_hi;
        hi = (hi + step).min(upper);
        f_hi = eval(hi).0;
        step *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::Convergence {
                what: "bracket search (upward)",
                achieved: target - f_hi,
                iterations: grow,
            });
        }
    }
    if f_lo > target {
        return Ok(lo);
    }
    if f_hi < target {
        return Ok(hi);
    }
    if f_lo == target {
        return Ok(lo);
    }
    if f_hi == target {
        return Ok(hi);
    }

    // Hybrid Newton / bisection.
    let mut x = if (lo..=hi).contains(&guess) {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..tol.max_iter {
        let (fx, dfx) = eval(x);
        let r = fx - target;
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width_tol = tol.abs_tol + tol.rel_tol * x.abs();
        if hi - lo <= width_tol {
            return Ok(0.5 * (lo + hi));
        }
        let newton = match dfx {
            Some(d) if d > 0.0 && d.is_finite() => Some(x - r / d),
            _ => None,
        };
        let next = match newton {
            Some(n) if n > lo && n < hi => n,
            _ => 0.5 * (lo + hi),
        };
        if (next - x).abs() <= width_tol {
            return Ok(next);
        }
        if next == lo || next == hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        what: "monotone inversion",
        achieved: hi - lo,
        iterations: tol.max_iter,
    })
}

/// Plain bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F>(f: F, mut a: f64, mut b: f64, tol: &Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..tol.max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() <= tol.abs_tol + tol.rel_tol * m.abs() {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Err(Error::Convergence {
        what: "bisection",
        achieved: (b - a).abs(),
        iterations: tol.max_iter,
    })
}
