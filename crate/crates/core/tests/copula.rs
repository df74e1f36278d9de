//! Copula surfaces: closed forms against the transition route, conditional
//! laws and the small-lag limit.

use diffcop::copula::{
    cir_closed_form, from_transition, gaussian_closed_form, ou_closed_form, rbm_closed_form, CopulaSurface,
};
use diffcop::models::{make_model, ModelId, Params};

const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn surfaces(s: f64, t: f64) -> Vec<CopulaSurface> {
    vec![
        gaussian_closed_form(s, t).unwrap(),
        ou_closed_form(0.4, s, t).unwrap(),
        rbm_closed_form(s, t).unwrap(),
        cir_closed_form(0.3, 2.5, 0.8, s, t).unwrap(),
    ]
}

#[test]
fn closed_forms_agree_with_transition_route() {
    let p = Params::new;
    let (s, t) = (1.0, 1.8);
    let models = [
        make_model(ModelId::Bm, &p(), 0.0, 0.0).unwrap(),
        make_model(
            ModelId::Ou,
            &p().with("alpha", 0.4).with("beta", 0.0).with("sigma", 1.0),
            0.0,
            0.0,
        )
        .unwrap(),
        make_model(ModelId::Rbm, &p(), 0.0, 0.0).unwrap(),
        // β = 1 with γ = 4β/σ² = 2.5.
        make_model(
            ModelId::Cir,
            &p().with("alpha", 0.3)
                .with("beta", 1.0)
                .with("sigma", (4.0f64 / 2.5).sqrt()),
            0.8,
            0.0,
        )
        .unwrap(),
    ];
    for (closed, model) in surfaces(s, t).iter().zip(&models) {
        let tr = from_transition(model, s, t).unwrap();
        for &u in &GRID {
            for &v in &GRID {
                let (a, b) = (closed.density(u, v).unwrap(), tr.density(u, v).unwrap());
                assert!(
                    (a - b).abs() <= 1e-8 * b.max(1.0),
                    "{}: c({u}, {v}) {a} vs {b}",
                    model.label()
                );
            }
        }
    }
}

#[test]
fn conditional_is_u_derivative_of_cdf() {
    let h = 1e-4;
    for c in surfaces(0.7, 1.5) {
        for &u in &GRID {
            for &v in &GRID {
                let fd = (c.cdf(u + h, v).unwrap() - c.cdf(u - h, v).unwrap()) / (2.0 * h);
                let cond = c.conditional(u, v).unwrap();
                assert!((fd - cond).abs() <= 1e-3, "{}: ({u}, {v}) {fd} vs {cond}", c.label());
            }
        }
    }
}

#[test]
fn conditional_matches_its_quadrature() {
    for c in surfaces(0.7, 1.5) {
        for &u in &GRID {
            for &v in &GRID {
                let a = c.conditional(u, v).unwrap();
                let b = c.conditional_by_quadrature(u, v).unwrap();
                assert!((a - b).abs() <= 1e-8, "{}: ({u}, {v}) {a} vs {b}", c.label());
            }
        }
    }
}

/// As `t ↓ s` the conditional law concentrates at `v = u`.
#[test]
fn small_lag_limit_is_comonotone() {
    let s = 2.0;
    for c in surfaces(s, s * (1.0 + 1e-4)) {
        for &u in &[0.3, 0.5, 0.7] {
            let below = c.conditional(u, u - 0.05).unwrap();
            let above = c.conditional(u, u + 0.05).unwrap();
            assert!(below <= 0.01, "{}: C({} | {u}) = {below}", c.label(), u - 0.05);
            assert!(above >= 0.99, "{}: C({} | {u}) = {above}", c.label(), u + 0.05);
        }
    }
}

#[test]
fn cdf_has_uniform_boundaries() {
    for c in surfaces(0.5, 3.0) {
        for &w in &GRID {
            assert!((c.cdf(w, 1.0).unwrap() - w).abs() <= 1e-7, "{}", c.label());
            assert!((c.cdf(1.0, w).unwrap() - w).abs() <= 1e-7, "{}", c.label());
            assert!(c.cdf(w, 0.0).unwrap().abs() <= 1e-9);
        }
    }
}

#[test]
fn invalid_arguments() {
    assert!(gaussian_closed_form(2.0, 1.0).is_err());
    assert!(gaussian_closed_form(0.0, 1.0).is_err());
    // α = 0 is the Brownian limit rather than an error.
    let (o, g) = (
        ou_closed_form(0.0, 1.0, 2.0).unwrap(),
        gaussian_closed_form(1.0, 2.0).unwrap(),
    );
    assert!((o.density(0.3, 0.6).unwrap() - g.density(0.3, 0.6).unwrap()).abs() < 1e-14);
    let g = gaussian_closed_form(1.0, 2.0).unwrap();
    assert!(g.density(1.5, 0.5).is_err());
    assert!(g.grid_eval(0).is_err());
}
