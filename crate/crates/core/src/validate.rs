//! Self-checks behind `diffcop validate`.
//!
//! Each suite returns one [`Check`] per invariant with the measured value and
//! the tolerance it was held to. Sample sizes are kept small so the whole run
//! finishes in seconds; the integration tests hold the full-size versions.

use std::fmt;
use std::str::FromStr;

use crate::copula::{
    cir_closed_form, from_transition, gaussian_closed_form, ou_closed_form, rbm_closed_form, Coord, CopulaFamily,
    CopulaGrid, CopulaSurface, Provenance,
};
use crate::error::{Error, Result};
use crate::models::{make_model, Model, ModelId, Params};
use crate::recombine::{first_passage_times, recombine, FptSample, FptSource, TargetMarginal};
use crate::special_fn::quad::{integrate, QuadOptions};
use crate::special_fn::{
    chi2nc_cdf, chi2nc_pdf, chi2nc_pdf_bessel, chi2nc_quantile, gamma_p, gamma_q, norm_cdf, norm_quantile,
};
use crate::stats::{ks_statistic, ks_uniform};
use crate::stt::{builtin_target, nonmonotone_copula, Chain, Piece, SpaceTimeTransform, TimeMap};
use crate::uniformize::{
    kolmogorov_copula_residual, simulate_paths, simulate_uniformized, EmpiricalCopula, PathEnsemble, ResidualGrid,
    SurfaceAt,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    SpecialFn,
    Models,
    Copula,
    Stt,
    Uniformize,
    Recombine,
    All,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::SpecialFn,
        Suite::Models,
        Suite::Copula,
        Suite::Stt,
        Suite::Uniformize,
        Suite::Recombine,
        Suite::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::SpecialFn => "special_fn",
            Suite::Models => "models",
            Suite::Copula => "copula",
            Suite::Stt => "stt",
            Suite::Uniformize => "uniformize",
            Suite::Recombine => "recombine",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite `{s}`")))
    }
}

/// One measured invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }

    /// Passes when `measured > threshold`.
    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: threshold,
            pass: measured > threshold,
        }
    }

    /// A check whose computation itself failed.
    pub fn failed(name: impl Into<String>, err: &Error) -> Self {
        let name = format!("{} ({err})", name.into());
        Self {
            name,
            measured: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} measured={:.3e} tol={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

/// Run a suite. Errors inside a check become failed checks, so the report
/// always lists every check.
pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::SpecialFn => special_fn_checks(),
        Suite::Models => model_checks(),
        Suite::Copula => copula_checks(),
        Suite::Stt => stt_checks(),
        Suite::Uniformize => uniformize_checks(),
        Suite::Recombine => recombine_checks(),
        Suite::All => Suite::ALL[..6].iter().flat_map(|&s| run_suite(s)).collect(),
    }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, &e))
}

fn max_abs(it: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    it.into_iter().try_fold(0.0f64, |m, d| Ok(m.max(d?.abs())))
}

const UNIT_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn surface_distance(a: &CopulaSurface, b: &CopulaSurface) -> Result<f64> {
    max_abs(
        UNIT_GRID
            .iter()
            .flat_map(|&u| UNIT_GRID.iter().map(move |&v| (u, v)))
            .map(|(u, v)| Ok(a.density(u, v)? - b.density(u, v)?)),
    )
}

fn special_fn_checks() -> Vec<Check> {
    vec![
        guarded("special_fn.normal_round_trip", || {
            let d = max_abs((1..1000).map(|i| {
                let p = i as f64 / 1000.0;
                Ok(norm_cdf(norm_quantile(p)?)? - p)
            }))?;
            Ok(Check::at_most("special_fn.normal_round_trip", d, 1e-8))
        }),
        guarded("special_fn.chi2nc_round_trip", || {
            let mut d: f64 = 0.0;
            for &(nu, lambda) in &[(1.0, 0.5), (6.25, 12.0), (625.0, 40.0)] {
                for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
                    let x = chi2nc_quantile(p, nu, lambda)?;
                    d = d.max((chi2nc_cdf(x, nu, lambda)? - p).abs());
                }
            }
            Ok(Check::at_most("special_fn.chi2nc_round_trip", d, 1e-8))
        }),
        guarded("special_fn.chi2nc_bessel_vs_mixture", || {
            let mut d: f64 = 0.0;
            for &(nu, lambda) in &[(1.0, 0.5), (3.0, 10.0), (6.25, 12.0), (30.0, 80.0)] {
                for &x in &[0.5, 2.0, 8.0, 20.0, 60.0] {
                    let a = chi2nc_pdf(x, nu, lambda)?;
                    let b = chi2nc_pdf_bessel(x, nu, lambda)?;
                    if a > 1e-200 {
                        d = d.max((a - b).abs() / a);
                    }
                }
            }
            Ok(Check::at_most("special_fn.chi2nc_bessel_vs_mixture_rel", d, 1e-8))
        }),
        guarded("special_fn.gamma_p_plus_q", || {
            let d = max_abs(
                [(0.5, 0.1), (2.0, 3.0), (50.0, 45.0), (312.5, 320.0)]
                    .iter()
                    .map(|&(a, x)| Ok(gamma_p(a, x)? + gamma_q(a, x)? - 1.0)),
            )?;
            Ok(Check::at_most("special_fn.gamma_p_plus_q", d, 1e-14))
        }),
    ]
}

/// Reference instances of every catalog model.
pub fn reference_models() -> Result<Vec<Model>> {
    let p = Params::new;
    Ok(vec![
        make_model(ModelId::Bm, &p(), 0.0, 0.0)?,
        make_model(ModelId::BmDrift, &p().with("mu", 0.3).with("sigma", 0.8), 0.5, 0.0)?,
        make_model(ModelId::Gbm, &p().with("mu", 0.1).with("sigma", 0.4), 1.0, 0.0)?,
        make_model(
            ModelId::Ou,
            &p().with("alpha", 0.5).with("beta", 0.2).with("sigma", 0.7),
            0.3,
            0.0,
        )?,
        make_model(ModelId::Rbm, &p(), 0.5, 0.0)?,
        make_model(
            ModelId::Cir,
            &p().with("alpha", 0.4).with("beta", 1.0).with("sigma", 0.8),
            1.5,
            0.0,
        )?,
        make_model(
            ModelId::CirSpecial,
            &p().with("alpha", 0.3).with("sigma", 1.0),
            0.5,
            0.0,
        )?,
        make_model(ModelId::Rayleigh, &p().with("a", 0.8).with("b", -0.2), 1.0, 0.0)?,
        make_model(ModelId::Bessel, &p().with("delta", 1.5), 1.0, 0.0)?,
    ])
}

fn model_checks() -> Vec<Check> {
    let models = match reference_models() {
        Ok(m) => m,
        Err(e) => return vec![Check::failed("models.construct", &e)],
    };
    let mut out = Vec::new();
    for m in &models {
        let name = format!("models.{}.transition_mass", m.label());
        out.push(guarded(&name, || {
            let y = m.x0();
            let iv = m.spec().interval;
            let mass = integrate(
                |x| m.transition_pdf(0.5, y, 1.5, x).unwrap_or(f64::NAN),
                iv.lower,
                iv.upper,
                &QuadOptions::tol(1e-10),
            )?
            .value;
            Ok(Check::at_most(name.clone(), (mass - 1.0).abs(), 1e-7))
        }));
        let name = format!("models.{}.quantile_round_trip", m.label());
        out.push(guarded(&name, || {
            let mg = m.marginal(1.0)?;
            let d = max_abs(UNIT_GRID.iter().map(|&p| Ok(mg.cdf(mg.quantile(p)?) - p)))?;
            Ok(Check::at_most(name.clone(), d, 1e-8))
        }));
    }
    out
}

fn copula_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let surfaces: Vec<(&str, Result<CopulaSurface>)> = vec![
        ("gaussian", gaussian_closed_form(1.0, 2.0)),
        ("ou", ou_closed_form(0.1, 30.0, 30.5)),
        ("rbm", rbm_closed_form(1.0, 2.0)),
        ("cir_gamma_1", cir_closed_form(0.1, 1.0, 10.0, 30.0, 30.5)),
        ("cir_gamma_6.25", cir_closed_form(0.1, 6.25, 10.0, 30.0, 30.5)),
        ("cir_gamma_625", cir_closed_form(0.1, 625.0, 10.0, 30.0, 30.5)),
    ];
    for (label, surface) in surfaces {
        let name = format!("copula.{label}.uniform_margins");
        out.push(guarded(&name, || {
            let c = surface?;
            let d = max_abs(
                [0.05, 0.3, 0.5, 0.7, 0.95]
                    .iter()
                    .flat_map(|&w| [c.margin_u(w).map(|m| m - 1.0), c.margin_v(w).map(|m| m - 1.0)]),
            )?;
            Ok(Check::at_most(name.clone(), d, 1e-5))
        }));
    }
    out.push(guarded("copula.ou.exchangeable", || {
        let g = ou_closed_form(0.1, 30.0, 30.5)?.grid_eval(41)?;
        let mut d: f64 = 0.0;
        for i in 0..g.n {
            for j in 0..g.n {
                d = d.max((g.at(i, j) - g.at(j, i)).abs());
            }
        }
        Ok(Check::at_most("copula.ou.exchangeable", d, 1e-9))
    }));
    out.push(guarded("copula.cir_gamma_1_vs_time_changed_rbm", || {
        let d = cir_rbm_distance(0.1, 10.0, 30.0, 30.5)?;
        Ok(Check::at_most("copula.cir_gamma_1_vs_time_changed_rbm", d, 1e-8))
    }));
    out.push(guarded("copula.grid_csv_round_trip", || {
        let g = rbm_closed_form(1.0, 2.0)?.grid_eval(17)?;
        let back = CopulaGrid::parse_csv(&g.to_csv())?;
        let d = max_abs(g.values.iter().zip(&back.values).map(|(a, b)| Ok(a - b)))?;
        Ok(Check::at_most("copula.grid_csv_round_trip", d, 0.0))
    }));
    out
}

/// `|c^{CIR, γ=1}_{s,t} − c^{RBM}_{φ(s),φ(t)}|` on the 9×9 grid, where the
/// reflected Brownian motion starts at `√x0` and `φ(τ) = (e^{ατ} − 1)/α`.
pub fn cir_rbm_distance(alpha: f64, x0: f64, s: f64, t: f64) -> Result<f64> {
    let cir = cir_closed_form(alpha, 1.0, x0, s, t)?;
    let rbm = make_model(ModelId::Rbm, &Params::new(), x0.sqrt(), 0.0)?;
    let phi = |tau: f64| (alpha * tau).exp_m1() / alpha;
    let rb = from_transition(&rbm, phi(s), phi(t))?;
    surface_distance(&cir, &rb)
}

/// Chain, source model, extra chain parameters and three `(s, t)` pairs.
pub type ChainCase = (Chain, Model, Params, [(f64, f64); 3]);

pub fn chain_cases() -> Result<Vec<ChainCase>> {
    let p = Params::new;
    let times = [(0.5, 1.0), (1.0, 2.5), (2.0, 2.2)];
    let cir = make_model(
        ModelId::Cir,
        &p().with("alpha", 0.4).with("beta", 1.0).with("sigma", 0.8),
        1.5,
        0.0,
    )?;
    Ok(vec![
        (
            Chain::OuToBm,
            make_model(
                ModelId::Ou,
                &p().with("alpha", 0.5).with("beta", 0.2).with("sigma", 0.7),
                0.3,
                0.0,
            )?,
            p(),
            times,
        ),
        (
            Chain::BmToSpecialCir,
            make_model(ModelId::Rbm, &p(), 0.0, 0.0)?,
            p().with("alpha", 0.3).with("sigma", 1.0),
            times,
        ),
        (Chain::CirToRayleigh, cir.clone(), p(), times),
        (
            Chain::RayleighToBessel,
            make_model(ModelId::Rayleigh, &p().with("a", 0.8).with("b", -0.2), 1.0, 0.0)?,
            p(),
            times,
        ),
        (Chain::CirToBessel, cir, p(), times),
    ])
}

/// Sup over the 9×9 grid and all time pairs of `|c^X_{s,t} − c^Y_{φ(s),φ(t)}|`.
pub fn chain_copula_distance(chain: Chain, source: &Model, extra: &Params, times: &[(f64, f64)]) -> Result<f64> {
    let (tr, target) = builtin_target(chain, source, extra)?;
    let mut d: f64 = 0.0;
    for &(s, t) in times {
        let cx = from_transition(source, s, t)?;
        let cy = from_transition(&target, tr.phi(s), tr.phi(t))?;
        d = d.max(surface_distance(&cx, &cy)?);
    }
    Ok(d)
}

/// `x ↦ |x|` as a two-piece transform.
pub fn abs_transform() -> Result<SpaceTimeTransform> {
    SpaceTimeTransform::new(
        "abs",
        TimeMap::identity(),
        std::sync::Arc::new(|_, x: f64| x.abs()),
        std::sync::Arc::new(|_, x: f64| if x == 0.0 { 0.0 } else { x.signum() }),
        vec![
            Piece::new(f64::NEG_INFINITY, 0.0, false, |_, y| -y),
            Piece::new(0.0, f64::INFINITY, true, |_, y| y),
        ],
    )
}

fn stt_checks() -> Vec<Check> {
    let mut out = Vec::new();
    match chain_cases() {
        Ok(cases) => {
            for (chain, source, extra, times) in cases {
                let name = format!("stt.{chain}.copula_preserved");
                out.push(guarded(&name, || {
                    let d = chain_copula_distance(chain, &source, &extra, &times)?;
                    Ok(Check::at_most(name.clone(), d, 1e-8))
                }));
            }
        }
        Err(e) => out.push(Check::failed("stt.chains", &e)),
    }
    out.push(guarded("stt.abs_bm_vs_rbm", || {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0)?;
        let nm = nonmonotone_copula(&bm, &abs_transform()?, 1.0, 2.0)?;
        let rbm = rbm_closed_form(1.0, 2.0)?;
        Ok(Check::at_most(
            "stt.abs_bm_vs_rbm",
            surface_distance(&nm.surface, &rbm)?,
            1e-10,
        ))
    }));
    out
}

fn gaussian_surface_at(t: f64) -> SurfaceAt {
    std::sync::Arc::new(move |s| gaussian_closed_form(s, t))
}

fn uniformize_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(guarded("uniformize.gaussian_backward_residual", || {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0)?;
        let r = kolmogorov_copula_residual(&gaussian_surface_at(2.0), &bm, 2.0, 1.0, &ResidualGrid::default())?;
        Ok(Check::at_most("uniformize.gaussian_backward_residual", r.max(), 1e-3))
    }));
    out.push(guarded("uniformize.independence_negative_control", || {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0)?;
        let indep: SurfaceAt = std::sync::Arc::new(|s| {
            CopulaSurface::new(
                std::sync::Arc::new(Independence),
                s,
                2.0,
                Provenance::ClosedForm,
                Params::new(),
                "independence",
            )
        });
        let r = kolmogorov_copula_residual(&indep, &bm, 2.0, 1.0, &ResidualGrid::default())?;
        Ok(Check::above("uniformize.independence_negative_control", r.max(), 0.1))
    }));
    out.push(guarded("uniformize.bm_empirical_copula", || {
        let bm = make_model(ModelId::Bm, &Params::new(), 0.0, 0.0)?;
        let ens = simulate_uniformized(&bm, &[1.0, 2.0], 20_000, 11)?;
        let emp = EmpiricalCopula::from_columns(&ens.column(0), &ens.column(1))?;
        let c = gaussian_closed_form(1.0, 2.0)?;
        let d = max_abs(
            UNIT_GRID
                .iter()
                .flat_map(|&u| UNIT_GRID.iter().map(move |&v| (u, v)))
                .map(|(u, v)| Ok(emp.cdf(u, v) - c.cdf(u, v)?)),
        )?;
        Ok(Check::at_most("uniformize.bm_empirical_copula_sup", d, 0.03))
    }));
    out.push(guarded("uniformize.paths_csv_round_trip", || {
        let ou = make_model(
            ModelId::Ou,
            &Params::new().with("alpha", 0.5).with("beta", 0.0).with("sigma", 1.0),
            0.0,
            0.0,
        )?;
        let ens = simulate_paths(&ou, &[0.5, 1.0, 1.5], 50, 3)?;
        let back = PathEnsemble::parse_csv(&ens.to_csv())?;
        let d = max_abs(ens.values.iter().zip(&back.values).map(|(a, b)| Ok(a - b)))?;
        Ok(Check::at_most("uniformize.paths_csv_round_trip", d, 0.0))
    }));
    out
}

struct Independence;

impl CopulaFamily for Independence {
    fn coord_u(&self, u: f64) -> Result<Coord> {
        Ok(vec![u])
    }
    fn coord_v(&self, v: f64) -> Result<Coord> {
        Ok(vec![v])
    }
    fn density_at(&self, _: &Coord, _: &Coord) -> f64 {
        1.0
    }
    fn conditional_at(&self, _: &Coord, b: &Coord) -> Option<f64> {
        Some(b[0])
    }
}

fn recombine_checks() -> Vec<Check> {
    let ou = match make_model(
        ModelId::Ou,
        &Params::new().with("alpha", 0.1).with("beta", 0.0).with("sigma", 1.0),
        0.0,
        0.0,
    ) {
        Ok(m) => m,
        Err(e) => return vec![Check::failed("recombine.construct", &e)],
    };
    let mut out = Vec::new();
    out.push(guarded("recombine.own_marginals_identity", || {
        let r = recombine(&ou, TargetMarginal::Model(ou.clone()))?;
        let d = max_abs([-3.0, -0.5, 0.0, 1.2, 4.0].iter().map(|&x| Ok(r.map(2.0, x)? - x)))?;
        Ok(Check::at_most("recombine.own_marginals_identity", d, 1e-12))
    }));
    out.push(guarded("recombine.uniform_target_ks", || {
        let r = recombine(&ou, TargetMarginal::Uniform)?;
        let ens = r.simulate(&[1.0, 2.0], 20_000, 5)?;
        let d = ks_uniform(&ens.column(1))?;
        Ok(Check::at_most("recombine.uniform_target_ks", d, 0.02))
    }));
    out.push(guarded("recombine.cir_marginal_ks", || {
        let cir = neuronal_target()?;
        let r = recombine(&ou, TargetMarginal::Model(cir.clone()))?;
        let ens = r.simulate(&[30.0], 5_000, 9)?;
        let mg = cir.marginal(30.0)?;
        let d = ks_statistic(&ens.column(0), |x| mg.cdf(x))?;
        Ok(Check::at_most("recombine.cir_marginal_ks", d, 0.03))
    }));
    out.push(guarded("recombine.map_monotone", || {
        let r = recombine(&ou, TargetMarginal::Model(neuronal_target()?))?;
        let xs: Vec<f64> = (0..=80).map(|i| -6.0 + 0.15 * i as f64).collect();
        let ok = r.is_monotone_on(30.0, &xs)?;
        Ok(Check::at_most(
            "recombine.map_monotone",
            if ok { 0.0 } else { 1.0 },
            0.0,
        ))
    }));
    out.push(guarded("recombine.fpt_unreachable_censored", || {
        let s = first_passage_times(FptSource::Model(&ou), 1e10, None, 2.0, 0.1, 20, 0)?;
        let back = FptSample::parse_csv(&s.to_csv())?;
        let bad = (s.censored() != 20 || back != s) as u8 as f64;
        Ok(Check::at_most("recombine.fpt_unreachable_censored", bad, 0.0))
    }));
    out
}

/// CIR marginals with `γ = 625`, `x0 = 10`, `α = 0.1` in the canonical
/// scaling `β = 1`.
pub fn neuronal_target() -> Result<Model> {
    let gamma: f64 = 625.0;
    make_model(
        ModelId::Cir,
        &Params::new()
            .with("alpha", 0.1)
            .with("beta", 1.0)
            .with("sigma", 2.0 / gamma.sqrt()),
        10.0,
        0.0,
    )
}
