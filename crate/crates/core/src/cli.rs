//! Command-line front end.
//!
//! Every subcommand reads its settings from flags and, optionally, a JSON
//! file given by `--config`. Flags win over the file; unknown JSON keys are
//! rejected. Settings are validated before any computation starts, and
//! problems found there exit with code 2. Failures during the computation
//! itself exit with code 1.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::copula::{
    cir_closed_form, from_transition, gaussian_closed_form, ou_closed_form, rbm_closed_form, CopulaSurface,
};
use crate::error::Error;
use crate::models::{make_model, Model, ModelId, Params};
use crate::recombine::{first_passage_times, recombine, FptSource, RecombinedProcess, TabulatedCdf, TargetMarginal};
use crate::uniformize::{simulate_paths, simulate_uniformized};
use crate::validate::{run_suite, Suite};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for a numerical failure or a failed validation check.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for invalid flags or configuration.
pub const EXIT_USAGE: i32 = 2;

/// Default grid resolution for `copula-grid`.
pub const DEFAULT_GRID_N: usize = 201;
/// Default RNG seed.
pub const DEFAULT_SEED: u64 = 0;
/// Default number of simulated paths.
pub const DEFAULT_PATHS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_FAILURE,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Errors in building models from user input are usage errors.
fn setup<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| usage(e.to_string()))
}

#[derive(Debug, Parser)]
#[command(name = "diffcop", version, about = "Copulas of one-dimensional diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Copula density on an n×n grid of cell midpoints, as CSV.
    CopulaGrid(GridArgs),
    /// Exact sample paths of a catalog model, as CSV.
    Simulate(SimulateArgs),
    /// Sample paths of a source copula recombined with target marginals.
    Recombine(RecombineArgs),
    /// First-passage times through a threshold on a time grid.
    Fpt(FptArgs),
    /// Run an invariant suite and report pass/fail per check.
    Validate(ValidateArgs),
}

/// Model selection shared by the subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Catalog id: bm, bm_drift, gbm, ou, rbm, cir, cir_special, rayleigh, bessel.
    #[arg(long)]
    pub model: Option<String>,
    /// Extra model parameter, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// CIR drift-to-noise ratio 4β/σ²; replaces `sigma`.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Initial state.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Initial time.
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Grid size (default 201).
    #[arg(long)]
    pub n: Option<usize>,
    /// `closed`, `transition` or `auto` (default).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated sampling times (default 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emit `F_t(X_t)` instead of `X_t`.
    #[arg(long)]
    pub uniformized: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Target marginal selection for `recombine` and `fpt`.
#[derive(Debug, Clone, Default, Args)]
pub struct TargetArgs {
    /// `uniform`, `table` or a catalog id.
    #[arg(long)]
    pub target: Option<String>,
    /// Target model parameter, repeatable.
    #[arg(long = "target-param", value_name = "NAME=VALUE")]
    pub target_params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_t0: Option<f64>,
    /// CSV of `x,p` rows for `--target table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RecombineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FptArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Restart state for a model source.
    #[arg(long, allow_hyphen_values = true)]
    pub reset: Option<f64>,
    /// Censoring horizon (default t0 + 10).
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Grid step (default 0.01).
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// special_fn, models, copula, stt, uniformize, recombine or all (default).
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Settings after merging flags over the JSON file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: Option<f64>,
    pub x0: Option<f64>,
    pub t0: Option<f64>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub n: Option<usize>,
    pub method: Option<String>,
    pub times: Option<Vec<f64>>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub uniformized: Option<bool>,
    pub target: Option<String>,
    #[serde(default)]
    pub target_params: BTreeMap<String, f64>,
    pub target_x0: Option<f64>,
    pub target_t0: Option<f64>,
    pub table: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub reset: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub suite: Option<String>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a JSON config; unknown keys are an error.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `self` (from flags) over `base` (from the file).
    pub fn over(self, base: RunConfig) -> RunConfig {
        let mut params = base.params;
        params.extend(self.params);
        let mut target_params = base.target_params;
        target_params.extend(self.target_params);
        RunConfig {
            model: self.model.or(base.model),
            params,
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            sigma: self.sigma.or(base.sigma),
            mu: self.mu.or(base.mu),
            gamma: self.gamma.or(base.gamma),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            delta: self.delta.or(base.delta),
            x0: self.x0.or(base.x0),
            t0: self.t0.or(base.t0),
            s: self.s.or(base.s),
            t: self.t.or(base.t),
            n: self.n.or(base.n),
            method: self.method.or(base.method),
            times: self.times.or(base.times),
            n_paths: self.n_paths.or(base.n_paths),
            seed: self.seed.or(base.seed),
            uniformized: self.uniformized.or(base.uniformized),
            target: self.target.or(base.target),
            target_params,
            target_x0: self.target_x0.or(base.target_x0),
            target_t0: self.target_t0.or(base.target_t0),
            table: self.table.or(base.table),
            threshold: self.threshold.or(base.threshold),
            reset: self.reset.or(base.reset),
            t_max: self.t_max.or(base.t_max),
            dt: self.dt.or(base.dt),
            suite: self.suite.or(base.suite),
            output: self.output.or(base.output),
        }
    }
}

fn parse_pairs(raw: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("expected NAME=VALUE, got `{kv}`")))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|e| usage(format!("parameter `{k}`: {e}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn some_vec(v: Vec<f64>) -> Option<Vec<f64>> {
    (!v.is_empty()).then_some(v)
}

impl ModelArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            model: self.model,
            params: parse_pairs(&self.params)?,
            alpha: self.alpha,
            beta: self.beta,
            sigma: self.sigma,
            mu: self.mu,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            delta: self.delta,
            x0: self.x0,
            t0: self.t0,
            ..RunConfig::default()
        })
    }
}

impl TargetArgs {
    fn apply(self, cfg: &mut RunConfig) -> Result<(), CliError> {
        cfg.target = self.target;
        cfg.target_params = parse_pairs(&self.target_params)?;
        cfg.target_x0 = self.target_x0;
        cfg.target_t0 = self.target_t0;
        cfg.table = self.table;
        Ok(())
    }
}

impl Command {
    /// Flags as a config, the `--config` path, and the subcommand name.
    fn into_config(self) -> Result<(RunConfig, Option<PathBuf>, &'static str), CliError> {
        Ok(match self {
            Command::CopulaGrid(a) => {
                let mut c = a.model.into_config()?;
                c.s = a.s;
                c.t = a.t;
                c.n = a.n;
                c.method = a.method;
                c.output = a.output;
                (c, a.config, "copula-grid")
            }
            Command::Simulate(a) => {
                let mut c = a.model.into_config()?;
                c.times = some_vec(a.times);
                c.n_paths = a.n_paths;
                c.seed = a.seed;
                c.uniformized = a.uniformized.then_some(true);
                c.output = a.output;
                (c, a.config, "simulate")
            }
            Command::Recombine(a) => {
                let mut c = a.model.into_config()?;
                a.target.apply(&mut c)?;
                c.times = some_vec(a.times);
                c.n_paths = a.n_paths;
                c.seed = a.seed;
                c.output = a.output;
                (c, a.config, "recombine")
            }
            Command::Fpt(a) => {
                let mut c = a.model.into_config()?;
                a.target.apply(&mut c)?;
                c.threshold = a.threshold;
                c.reset = a.reset;
                c.t_max = a.t_max;
                c.dt = a.dt;
                c.n_paths = a.n_paths;
                c.seed = a.seed;
                c.output = a.output;
                (c, a.config, "fpt")
            }
            Command::Validate(a) => (
                RunConfig {
                    suite: a.suite,
                    ..RunConfig::default()
                },
                a.config,
                "validate",
            ),
        })
    }
}

/// Parameter values used when neither flags nor config name them.
fn default_params(id: ModelId) -> Params {
    let p = Params::new();
    match id {
        ModelId::Bm | ModelId::Rbm => p,
        ModelId::BmDrift | ModelId::Gbm => p.with("mu", 0.0).with("sigma", 1.0),
        ModelId::Ou => p.with("alpha", 0.1).with("beta", 0.0).with("sigma", 1.0),
        ModelId::Cir => p.with("alpha", 0.1).with("beta", 1.0).with("sigma", 1.0),
        ModelId::CirSpecial => p.with("alpha", 0.1).with("sigma", 1.0),
        ModelId::Rayleigh => p.with("a", 0.5).with("b", 0.0),
        ModelId::Bessel => p.with("delta", 0.5),
    }
}

fn default_x0(id: ModelId) -> f64 {
    match id {
        ModelId::Gbm => 1.0,
        _ => 0.0,
    }
}

fn parse_model_id(name: &str) -> Result<ModelId, CliError> {
    let name = if name == "gaussian" { "bm" } else { name };
    setup(name.parse())
}

/// Resolve a parameter map for `id`: defaults, then `given`. A `gamma` entry
/// for the CIR families fixes `σ = 2√(β/γ)`.
fn resolve_params(id: ModelId, given: &BTreeMap<String, f64>) -> Result<Params, CliError> {
    for (k, v) in given {
        if !v.is_finite() {
            return Err(usage(format!("parameter `{k}` must be finite")));
        }
    }
    let mut given = given.clone();
    let gamma = given.remove("gamma");
    let mut params = default_params(id);
    for (k, &v) in &given {
        params.insert(k, v);
    }
    if let Some(gamma) = gamma {
        if !matches!(id, ModelId::Cir | ModelId::CirSpecial) {
            return Err(usage(format!("`gamma` applies to the CIR models, not {id}")));
        }
        if given.contains_key("sigma") {
            return Err(usage("give either `gamma` or `sigma`, not both"));
        }
        if !(gamma > 0.0) {
            return Err(usage("`gamma` must be positive"));
        }
        let beta = if id == ModelId::Cir {
            params.get("beta").map_err(|e| usage(e.to_string()))?
        } else {
            // cir_special fixes β = σ²/4, hence γ = 1.
            if (gamma - 1.0).abs() > 1e-12 {
                return Err(usage("cir_special has gamma = 1"));
            }
            return Ok(params);
        };
        params.insert("sigma", 2.0 * (beta / gamma).sqrt());
    }
    Ok(params)
}

fn model_param_map(cfg: &RunConfig) -> BTreeMap<String, f64> {
    let mut m = cfg.params.clone();
    let named = [
        ("alpha", cfg.alpha),
        ("beta", cfg.beta),
        ("sigma", cfg.sigma),
        ("mu", cfg.mu),
        ("gamma", cfg.gamma),
        ("a", cfg.a),
        ("b", cfg.b),
        ("delta", cfg.delta),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    }
    m
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("`{name}` must be finite, got {v}")))
    }
}

fn source_model(cfg: &RunConfig) -> Result<Model, CliError> {
    let name = cfg.model.as_deref().ok_or_else(|| usage("missing `--model`"))?;
    let id = parse_model_id(name)?;
    let params = resolve_params(id, &model_param_map(cfg))?;
    let x0 = finite("x0", cfg.x0.unwrap_or(default_x0(id)))?;
    let t0 = finite("t0", cfg.t0.unwrap_or(0.0))?;
    setup(make_model(id, &params, x0, t0))
}

fn target_marginal(cfg: &RunConfig, source: &Model) -> Result<Option<TargetMarginal>, CliError> {
    let Some(name) = cfg.target.as_deref() else {
        if cfg.table.is_some() || !cfg.target_params.is_empty() {
            return Err(usage("target settings given without `--target`"));
        }
        return Ok(None);
    };
    let target = match name {
        "uniform" => TargetMarginal::Uniform,
        "table" => {
            let path = cfg
                .table
                .as_ref()
                .ok_or_else(|| usage("`--target table` needs `--table`"))?;
            let text = fs::read_to_string(path).map_err(|e| usage(format!("table {}: {e}", path.display())))?;
            TargetMarginal::Table(setup(TabulatedCdf::parse_csv(&text))?)
        }
        other => {
            let id = parse_model_id(other)?;
            let params = resolve_params(id, &cfg.target_params)?;
            let x0 = finite("target_x0", cfg.target_x0.unwrap_or(default_x0(id)))?;
            let t0 = finite("target_t0", cfg.target_t0.unwrap_or(source.t0()))?;
            TargetMarginal::Model(setup(make_model(id, &params, x0, t0))?)
        }
    };
    Ok(Some(target))
}

fn sampling_times(cfg: &RunConfig, t0: f64) -> Result<Vec<f64>, CliError> {
    let times = cfg.times.clone().unwrap_or_else(|| vec![t0 + 1.0]);
    if times.is_empty() {
        return Err(usage("`times` must not be empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times[0] <= t0 || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage(format!(
            "`times` must be finite, strictly increasing and after t0 = {t0}"
        )));
    }
    Ok(times)
}

fn n_paths(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.n_paths.unwrap_or(DEFAULT_PATHS) {
        0 => Err(usage("`n_paths` must be at least 1")),
        n => Ok(n),
    }
}

/// A fully validated job, ready to run.
enum Job {
    Grid {
        surface: CopulaSurface,
        n: usize,
    },
    Simulate {
        model: Model,
        times: Vec<f64>,
        n_paths: usize,
        seed: u64,
        uniformized: bool,
    },
    Recombine {
        process: RecombinedProcess,
        times: Vec<f64>,
        n_paths: usize,
        seed: u64,
    },
    Fpt {
        model: Model,
        process: Option<RecombinedProcess>,
        threshold: f64,
        reset: Option<f64>,
        t_max: f64,
        dt: f64,
        n_paths: usize,
        seed: u64,
    },
    Validate(Suite),
}

fn closed_surface(id: ModelId, params: &Params, x0: f64, s: f64, t: f64) -> Result<Option<CopulaSurface>, CliError> {
    let get = |k: &str| params.get(k).map_err(|e| usage(e.to_string()));
    let surface = match id {
        ModelId::Bm | ModelId::BmDrift | ModelId::Gbm => gaussian_closed_form(s, t),
        ModelId::Ou => {
            let alpha = get("alpha")?;
            if alpha == 0.0 {
                gaussian_closed_form(s, t)
            } else {
                ou_closed_form(alpha, s, t)
            }
        }
        ModelId::Rbm if x0 == 0.0 => rbm_closed_form(s, t),
        ModelId::Cir => {
            let (alpha, beta, sigma) = (get("alpha")?, get("beta")?, get("sigma")?);
            if alpha <= 0.0 {
                return Ok(None);
            }
            cir_closed_form(alpha, 4.0 * beta / (sigma * sigma), x0 / beta, s, t)
        }
        _ => return Ok(None),
    };
    Ok(Some(setup(surface)?))
}

fn prepare(cmd: &str, cfg: &RunConfig) -> Result<Job, CliError> {
    match cmd {
        "copula-grid" => {
            let model = source_model(cfg)?;
            let s = finite("s", cfg.s.ok_or_else(|| usage("missing `--s`"))?)?;
            let t = finite("t", cfg.t.ok_or_else(|| usage("missing `--t`"))?)?;
            if !(model.t0() < s && s < t) {
                return Err(usage(format!(
                    "need t0 < s < t, got t0 = {}, s = {s}, t = {t}",
                    model.t0()
                )));
            }
            let n = cfg.n.unwrap_or(DEFAULT_GRID_N);
            if n == 0 {
                return Err(usage("`n` must be at least 1"));
            }
            let id = model.id().expect("catalog model");
            let method = cfg.method.as_deref().unwrap_or("auto");
            let closed = match method {
                "auto" | "closed" if model.t0() == 0.0 => closed_surface(id, model.params(), model.x0(), s, t)?,
                "auto" | "closed" => None,
                "transition" => None,
                other => {
                    return Err(usage(format!(
                        "unknown method `{other}`; use closed, transition or auto"
                    )))
                }
            };
            let surface = match closed {
                Some(c) => c,
                None if method == "closed" => {
                    return Err(usage(format!(
                        "no closed form for {id} with these settings; use `--method transition`"
                    )))
                }
                None => setup(from_transition(&model, s, t))?,
            };
            Ok(Job::Grid { surface, n })
        }
        "simulate" => {
            let model = source_model(cfg)?;
            Ok(Job::Simulate {
                times: sampling_times(cfg, model.t0())?,
                n_paths: n_paths(cfg)?,
                seed: cfg.seed.unwrap_or(DEFAULT_SEED),
                uniformized: cfg.uniformized.unwrap_or(false),
                model,
            })
        }
        "recombine" => {
            let model = source_model(cfg)?;
            let target = target_marginal(cfg, &model)?.ok_or_else(|| usage("missing `--target`"))?;
            Ok(Job::Recombine {
                times: sampling_times(cfg, model.t0())?,
                n_paths: n_paths(cfg)?,
                seed: cfg.seed.unwrap_or(DEFAULT_SEED),
                process: setup(recombine(&model, target))?,
            })
        }
        "fpt" => {
            let model = source_model(cfg)?;
            let process = target_marginal(cfg, &model)?
                .map(|t| setup(recombine(&model, t)))
                .transpose()?;
            let threshold = finite(
                "threshold",
                cfg.threshold.ok_or_else(|| usage("missing `--threshold`"))?,
            )?;
            let reset = cfg.reset.map(|r| finite("reset", r)).transpose()?;
            if reset.is_some() && process.is_some() {
                return Err(usage("`reset` is not supported for recombined processes"));
            }
            if let Some(r) = reset {
                setup(model.restarted(r, model.t0()))?;
            }
            let dt = finite("dt", cfg.dt.unwrap_or(0.01))?;
            if dt <= 0.0 {
                return Err(usage("`dt` must be positive"));
            }
            let t_max = finite("t_max", cfg.t_max.unwrap_or(model.t0() + 10.0))?;
            if t_max < model.t0() + dt {
                return Err(usage(format!("`t_max` must be at least t0 + dt = {}", model.t0() + dt)));
            }
            Ok(Job::Fpt {
                model,
                process,
                threshold,
                reset,
                t_max,
                dt,
                n_paths: n_paths(cfg)?,
                seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            })
        }
        "validate" => Ok(Job::Validate(
            cfg.suite
                .as_deref()
                .unwrap_or("all")
                .parse()
                .map_err(|e: Error| usage(e.to_string()))?,
        )),
        other => Err(usage(format!("unknown command `{other}`"))),
    }
}

fn write_output(
    path: Option<&Path>,
    out: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> crate::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(Error::from)?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(Error::from)?;
        }
        None => {
            body(out)?;
            out.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Returns the exit code; validation failures give [`EXIT_FAILURE`].
fn execute(job: Job, output: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    match job {
        Job::Grid { surface, n } => {
            let grid = surface.grid_eval(n)?;
            write_output(output, out, |w| grid.write_csv(w))?;
        }
        Job::Simulate {
            model,
            times,
            n_paths,
            seed,
            uniformized,
        } => {
            let ens = if uniformized {
                simulate_uniformized(&model, &times, n_paths, seed)?
            } else {
                simulate_paths(&model, &times, n_paths, seed)?
            };
            write_output(output, out, |w| ens.write_csv(w))?;
        }
        Job::Recombine {
            process,
            times,
            n_paths,
            seed,
        } => {
            let ens = process.simulate(&times, n_paths, seed)?;
            write_output(output, out, |w| ens.write_csv(w))?;
        }
        Job::Fpt {
            model,
            process,
            threshold,
            reset,
            t_max,
            dt,
            n_paths,
            seed,
        } => {
            let source = match &process {
                Some(p) => FptSource::Recombined(p),
                None => FptSource::Model(&model),
            };
            let sample = first_passage_times(source, threshold, reset, t_max, dt, n_paths, seed)?;
            write_output(output, out, |w| sample.write_csv(w))?;
        }
        Job::Validate(suite) => {
            let checks = run_suite(suite);
            let failed = checks.iter().filter(|c| !c.pass).count();
            write_output(output, out, |w| {
                for c in &checks {
                    writeln!(w, "{c}")?;
                }
                writeln!(w, "{} checks, {failed} failed", checks.len())?;
                Ok(())
            })?;
            if failed > 0 {
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Cap rayon's worker count from `DIFFCOP_THREADS`.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DIFFCOP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("DIFFCOP_THREADS must be a positive integer, got `{raw}`")))?;
    // A pool may already exist when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run a parsed command, writing results to `out` unless an output path is set.
pub fn run_command(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let (flags, config_path, name) = command.into_config()?;
    let base = match config_path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    let cfg = flags.over(base);
    let job = prepare(name, &cfg)?;
    execute(job, cfg.output.as_deref(), out)
}

/// Full entry point: parse `args` (including the program name), run, and
/// return the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|()| {
        let stdout = io::stdout();
        let mut out = BufWriter::new(stdout.lock());
        run_command(cli.command, &mut out)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("diffcop: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let base = RunConfig::from_json(r#"{"model": "ou", "alpha": 0.3, "n": 11, "params": {"beta": 1.0}}"#).unwrap();
        let flags = RunConfig {
            alpha: Some(0.1),
            params: [("sigma".to_string(), 2.0)].into(),
            ..RunConfig::default()
        };
        let cfg = flags.over(base);
        assert_eq!(cfg.alpha, Some(0.1));
        assert_eq!(cfg.n, Some(11));
        assert_eq!(cfg.model.as_deref(), Some("ou"));
        assert_eq!(cfg.params.len(), 2);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_json(r#"{"modle": "ou"}"#),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn gamma_sets_sigma() {
        let given: BTreeMap<String, f64> = [("gamma".to_string(), 625.0)].into();
        let p = resolve_params(ModelId::Cir, &given).unwrap();
        assert!((p.get("sigma").unwrap() - 0.08).abs() < 1e-15);
        assert!(resolve_params(ModelId::Ou, &given).is_err());
    }
}
