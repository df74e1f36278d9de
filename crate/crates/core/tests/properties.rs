//! Randomised invariants.

use diffcop::copula::{gaussian_closed_form, ou_closed_form, CopulaGrid, Provenance};
use diffcop::models::{make_model, ModelId, Params};
use diffcop::recombine::{recombine, FptSample, TabulatedCdf, TargetMarginal};
use diffcop::special_fn::{chi2nc_cdf, chi2nc_quantile, norm_cdf, norm_quantile};
use diffcop::stt::nonmonotone_copula;
use diffcop::uniformize::PathEnsemble;
use diffcop::validate::abs_transform;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_copula_is_exchangeable(u in unit(), v in unit(), s in 0.1f64..5.0, lag in 0.01f64..5.0) {
        let c = gaussian_closed_form(s, s + lag).unwrap();
        let (a, b) = (c.density(u, v).unwrap(), c.density(v, u).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn conditional_is_monotone_in_v(u in unit(), v in unit(), dv in 0.0f64..0.3, alpha in 0.05f64..2.0) {
        let c = ou_closed_form(alpha, 1.0, 1.7).unwrap();
        let v2 = (v + dv).min(0.999);
        prop_assert!(c.conditional(u, v).unwrap() <= c.conditional(u, v2).unwrap() + 1e-12);
    }

    #[test]
    fn normal_quantile_round_trip(p in 1e-12f64..(1.0 - 1e-12)) {
        let z = norm_quantile(p).unwrap();
        let back = norm_cdf(z).unwrap();
        prop_assert!((back - p).abs() <= 1e-14 * p.min(1.0 - p).max(1e-3));
    }

    #[test]
    fn noncentral_chi2_quantile_round_trip(p in 0.01f64..0.99, nu in 0.5f64..30.0, lambda in 0.0f64..50.0) {
        let x = chi2nc_quantile(p, nu, lambda).unwrap();
        prop_assert!((chi2nc_cdf(x, nu, lambda).unwrap() - p).abs() <= 1e-9);
    }

    #[test]
    fn ou_marginal_round_trip(p in 0.001f64..0.999, alpha in 0.01f64..3.0, t in 0.05f64..20.0) {
        let m = make_model(
            ModelId::Ou,
            &Params::new().with("alpha", alpha).with("beta", 0.5).with("sigma", 1.2),
            -1.0,
            0.0,
        )
        .unwrap();
        let mg = m.marginal(t).unwrap();
        prop_assert!((mg.cdf(mg.quantile(p).unwrap()) - p).abs() <= 1e-12);
    }

    #[test]
    fn nonmonotone_weights_sum_to_exactly_one(q in 0.0f64..4.0, x0 in -2.0f64..2.0) {
        let bm = make_model(ModelId::Bm, &Params::new(), x0, 0.0).unwrap();
        let nm = nonmonotone_copula(&bm, &abs_transform().unwrap(), 1.0, 2.0).unwrap();
        let sum: f64 = nm.marginal_t.weights(q).unwrap().iter().map(|&(_, w)| w).sum();
        prop_assert_eq!(sum, 1.0);
    }

    #[test]
    fn tabulated_cdf_is_monotone(steps in prop::collection::vec(0.01f64..1.0, 3..12), a in unit(), b in unit()) {
        let xs: Vec<f64> = steps.iter().scan(0.0, |acc, d| { *acc += d; Some(*acc) }).collect();
        let n = xs.len();
        let ps: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let tab = TabulatedCdf::new(xs.clone(), ps).unwrap();
        let (lo, hi) = (xs[0] - 1.0, xs[n - 1] + 1.0);
        let (x, y) = (lo + a * (hi - lo), lo + b * (hi - lo));
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(tab.cdf(x) <= tab.cdf(y));
        prop_assert!(tab.pdf(x) >= 0.0);
        let p = 0.5 * (a + b);
        prop_assert!((tab.cdf(tab.quantile(p).unwrap()) - p).abs() <= 1e-9);
    }

    #[test]
    fn recombination_map_is_monotone(x in -3.0f64..3.0, dx in 0.0f64..2.0, t in 0.2f64..5.0) {
        let ou = make_model(
            ModelId::Ou,
            &Params::new().with("alpha", 0.3).with("beta", 0.0).with("sigma", 1.0),
            0.0,
            0.0,
        )
        .unwrap();
        let cir = make_model(
            ModelId::Cir,
            &Params::new().with("alpha", 0.5).with("beta", 1.0).with("sigma", 0.7),
            1.0,
            0.0,
        )
        .unwrap();
        let r = recombine(&ou, TargetMarginal::Model(cir)).unwrap();
        prop_assert!(r.map(t, x).unwrap() <= r.map(t, x + dx).unwrap());
    }

    #[test]
    fn copula_grid_csv_round_trip(vals in prop::collection::vec(0.0f64..50.0, 9), s in 0.1f64..3.0) {
        let g = CopulaGrid { n: 3, s, t: s + 0.5, provenance: Provenance::ClosedForm, values: vals };
        prop_assert_eq!(CopulaGrid::parse_csv(&g.to_csv()).unwrap(), g);
    }

    #[test]
    fn path_ensemble_csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 12), seed in any::<u64>()) {
        let e = PathEnsemble { times: vec![0.5, 1.0, 2.5], seed, n_paths: 4, values: vals };
        prop_assert_eq!(PathEnsemble::parse_csv(&e.to_csv()).unwrap(), e);
    }

    #[test]
    fn fpt_csv_round_trip(times in prop::collection::vec(prop::option::of(0.01f64..10.0), 1..20)) {
        let f = FptSample { t_max: 10.0, times };
        let back = FptSample::parse_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(&back.times, &f.times);
        if f.censored() > 0 {
            prop_assert_eq!(back.t_max, 10.0);
        }
    }
}
