//! Standard normal density, distribution and quantile.
//!
//! `Φ` is evaluated through the regularized incomplete gamma,
//! `Φ(-z) = Q(1/2, z²/2) / 2` for `z ≥ 0`, which keeps full relative accuracy in
//! both tails. The quantile uses Wichura's rational approximations, polished
//! by one Newton step.

use super::gamma::gamma_pq;
use super::{check_finite, check_open_unit, clamp_prob};
use crate::error::Result;

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;

#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Lower tail `Φ(z)`.
#[inline]
pub(crate) fn big_phi(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    let (_, q) = gamma_pq(0.5, 0.5 * z * z).expect("valid incomplete gamma arguments");
    if z < 0.0 {
        0.5 * q
    } else {
        1.0 - 0.5 * q
    }
}

/// Upper tail `1 - Φ(z)` without cancellation.
#[inline]
pub(crate) fn big_phi_c(z: f64) -> f64 {
    big_phi(-z)
}

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Wichura's AS 241 rational approximations for `p ≤ 1/2`.
fn as241_lower(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_46,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_854,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_87,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_888,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = (-p.ln()).sqrt();
    if r <= 5.0 {
        let r = r - 1.6;
        -poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        -poly(&E, r) / poly(&F, r)
    }
}

/// `Φ⁻¹(p)` without argument validation; `p` is clamped first.
pub(crate) fn phi_inv(p: f64) -> f64 {
    let p = clamp_prob(p);
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -phi_inv(1.0 - p);
    }
    let z = as241_lower(p);
    // One Newton step against the incomplete-gamma `Φ` absorbs the last ulps.
    let d = phi(z);
    if d > 0.0 {
        z - (big_phi(z) - p) / d
    } else {
        z
    }
}

/// Standard normal density `φ(z)`.
pub fn norm_pdf(z: f64) -> Result<f64> {
    check_finite("z", z)?;
    Ok(phi(z))
}

/// Standard normal distribution `Φ(z)`.
pub fn norm_cdf(z: f64) -> Result<f64> {
    check_finite("z", z)?;
    Ok(big_phi(z))
}

/// Standard normal upper tail `1 - Φ(z)`.
pub fn norm_sf(z: f64) -> Result<f64> {
    check_finite("z", z)?;
    Ok(big_phi_c(z))
}

/// Standard normal quantile `Φ⁻¹(p)`, `p ∈ (0, 1)`.
pub fn norm_quantile(p: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    Ok(phi_inv(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::PROB_FLOOR;

    #[test]
    fn density_values() {
        assert_eq!(norm_pdf(0.0).unwrap(), 0.398_942_280_401_432_7);
        assert!((norm_pdf(1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-16);
        assert_eq!(norm_pdf(-1.0).unwrap(), norm_pdf(1.0).unwrap());
        assert!(norm_pdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(norm_cdf(0.0).unwrap(), 0.5);
        assert!((norm_cdf(40.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((norm_cdf(1.959_963_985).unwrap() - 0.975).abs() < 1e-9);
        assert!(norm_cdf(f64::INFINITY).is_err());
        for &z in &[0.1, 0.7, 1.3, 2.9, 5.0, 8.5] {
            let s = norm_cdf(z).unwrap() + norm_cdf(-z).unwrap();
            assert!((s - 1.0).abs() < 2e-16, "z = {z}");
        }
    }

    #[test]
    fn cdf_far_tail_is_relative_accurate() {
        // Φ(-10) = 7.619853024160527e-24
        let v = norm_cdf(-10.0).unwrap();
        assert!(((v - 7.619_853_024_160_527e-24) / v).abs() < 1e-12);
    }

    #[test]
    fn quantile_values() {
        assert_eq!(norm_quantile(0.5).unwrap(), 0.0);
        assert!((norm_quantile(0.975).unwrap() - 1.959_963_985).abs() < 1e-8);
        assert!((norm_quantile(norm_cdf(1.234).unwrap()).unwrap() - 1.234).abs() < 1e-10);
        assert!(norm_quantile(0.0).is_err());
        assert!(norm_quantile(1.0).is_err());
        assert!(norm_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_grid_round_trip() {
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let z = norm_quantile(p).unwrap();
            assert!((norm_cdf(z).unwrap() - p).abs() <= 1e-10, "p = {p}");
            let zm = norm_quantile(1.0 - p).unwrap();
            assert!((z + zm).abs() < 1e-12, "odd symmetry at p = {p}");
        }
    }

    #[test]
    fn quantile_is_relative_accurate_in_the_tail() {
        for &p in &[PROB_FLOOR, 1e-12, 1e-8, 3e-3, 0.02, 0.07, 0.3] {
            let z = norm_quantile(p).unwrap();
            let back = norm_cdf(z).unwrap();
            assert!(((back - p) / p).abs() < 1e-13, "p = {p}: {back}");
            // The rational approximation alone is already close.
            assert!((as241_lower(p) - z).abs() < 1e-13 * z.abs().max(1.0), "p = {p}");
        }
    }
}
