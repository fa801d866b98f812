//! Reproduction harness for the numerical examples: data generation,
//! the relative error metric, and the scripted runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman::{
    modified_bregman_with, tikhonov_bregman_with, tv_solve_with, ExponentMode, SolverConfig, StopReason,
};
use crate::error::{domain, Error, Result};
use crate::exponent::ExponentConfig;
use crate::forward::{add_noise, gaussian_initial, shepp_logan_phantom, ForwardOperator, NoiseSpec};
use crate::grid::{Grid, ScalarField};
use crate::special::ModelParams;
use crate::subproblems::SplitConfig;

/// `‖rec - truth‖ / ‖truth‖ · 100`.
pub fn rel_err(rec: &ScalarField, truth: &ScalarField) -> Result<f64> {
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(rec.sub(truth)?.norm() / denom * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    VarTv,
    Tv,
    Tikhonov,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::VarTv, Method::Tv, Method::Tikhonov];

    pub fn name(self) -> &'static str {
        match self {
            Method::VarTv => "vartv",
            Method::Tv => "tv",
            Method::Tikhonov => "tikhonov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| domain(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialField {
    Gaussian,
    SheppLogan,
}

impl InitialField {
    pub fn build(self, grid: Grid) -> Result<ScalarField> {
        match self {
            InitialField::Gaussian => Ok(gaussian_initial(grid)),
            InitialField::SheppLogan => shepp_logan_phantom(grid),
        }
    }
}

/// Everything needed to regenerate a run; echoed verbatim into reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub half_width: f64,
    pub model: ModelParams,
    /// Multiplicative noise level of the synthetic data.
    pub delta: f64,
    pub lambda: f64,
    /// `None` selects `10⁻³ · λ · max Ŝ²`.
    pub lambda_tilde: Option<f64>,
    pub tau: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub m_max: usize,
    pub k_max: usize,
    pub dt0: f64,
    pub s: f64,
    pub ell_max: usize,
    pub tol: f64,
    pub exponent: ExponentConfig,
    pub exponent_mode: ExponentMode,
}

/// Fidelity weight used when none is given.
pub const DEFAULT_LAMBDA: f64 = 200.0;
/// Fidelity weight of the α-sweep.
pub const SWEEP_LAMBDA: f64 = 2e4;
/// Splitting weight used by the scripted experiments.
pub const DEFAULT_LAMBDA_TILDE: f64 = 3.0;

impl ExperimentConfig {
    pub fn example1() -> Self {
        Self {
            n: 256,
            half_width: 10.0,
            model: ModelParams {
                alpha: 0.6,
                beta: 1.0,
                final_time: 1.0,
            },
            delta: 0.0005,
            lambda: DEFAULT_LAMBDA,
            lambda_tilde: Some(DEFAULT_LAMBDA_TILDE),
            tau: 1.01,
            runs: 10,
            base_seed: 0,
            m_max: 500,
            k_max: 2,
            dt0: 0.1,
            s: 0.1,
            ell_max: 5,
            tol: 1e-6,
            exponent: ExponentConfig::default(),
            exponent_mode: ExponentMode::Edges,
        }
    }

    pub fn example2() -> Self {
        Self {
            model: ModelParams {
                alpha: 0.6,
                beta: 0.9,
                final_time: 1.0,
            },
            ..Self::example1()
        }
    }

    /// Phantom, `β = 1`, `T = 1`. The integer-order data is far more smoothed,
    /// so the fidelity weight is raised until every order stops by discrepancy
    /// within `m_max`.
    pub fn alpha_sweep() -> Self {
        Self {
            model: ModelParams {
                alpha: 1.0,
                beta: 1.0,
                final_time: 1.0,
            },
            lambda: SWEEP_LAMBDA,
            runs: 1,
            ..Self::example1()
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|k| self.base_seed + k).collect()
    }

    pub fn resolved_lambda_tilde(&self, op: &ForwardOperator) -> f64 {
        self.lambda_tilde.unwrap_or_else(|| {
            let smax = op.symbol().max();
            1e-3 * self.lambda * smax * smax
        })
    }

    /// Solver settings for one run whose stopping rule sees `delta`.
    pub fn solver(&self, op: &ForwardOperator, delta: f64) -> SolverConfig {
        SolverConfig {
            model: self.model,
            split: SplitConfig {
                lambda: self.lambda,
                lambda_tilde: self.resolved_lambda_tilde(op),
                dt0: self.dt0,
                s: self.s,
                ell_max: self.ell_max,
                tol: self.tol,
            },
            exponent: self.exponent,
            exponent_mode: self.exponent_mode,
            tau: self.tau,
            delta,
            m_max: self.m_max,
            k_max: self.k_max,
            seed: self.base_seed,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.half_width)
    }
}

/// Synthetic observation of a known initial state.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub truth: ScalarField,
    pub clean: ScalarField,
    pub noisy: ScalarField,
    /// `‖g^δ - g‖`, fed to the stopping rule.
    pub realized_delta: f64,
}

pub fn make_dataset(truth: &ScalarField, op: &ForwardOperator, delta: f64, seed: u64) -> Result<Dataset> {
    let clean = op.apply(truth)?;
    let noisy = add_noise(&clean, NoiseSpec { delta, seed })?;
    let realized_delta = noisy.sub(&clean)?.norm();
    Ok(Dataset {
        truth: truth.clone(),
        clean,
        noisy,
        realized_delta,
    })
}

/// Outcome of one method on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub rel_err: f64,
    pub m_stop: usize,
    pub stopped_by: StopReason,
}

pub fn run_method(
    method: Method,
    data: &Dataset,
    cfg: &SolverConfig,
    op: &ForwardOperator,
) -> Result<(ScalarField, MethodRun)> {
    let result = match method {
        Method::VarTv => modified_bregman_with(&data.noisy, cfg, op)?,
        Method::Tv => tv_solve_with(&data.noisy, cfg, op)?,
        Method::Tikhonov => tikhonov_bregman_with(&data.noisy, cfg, op)?,
    };
    let run = MethodRun {
        method,
        rel_err: rel_err(&result.u_rec, &data.truth)?,
        m_stop: result.m_stop,
        stopped_by: result.stopped_by,
    };
    Ok((result.u_rec, run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub realized_delta: f64,
    pub methods: Vec<MethodRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub params: ExperimentConfig,
    /// Mean relative error (percent) over seeds.
    pub rel_err_by_method: BTreeMap<Method, f64>,
    /// Median stopping index of the variable-exponent solver.
    pub m_stop: usize,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    pub runtime_ms: u64,
}

impl ExperimentReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v.get(v.len() / 2).copied().unwrap_or(0)
}

/// Runs `methods` on independent noise realizations, one per seed.
pub fn run_experiment(
    name: &str,
    initial: InitialField,
    cfg: &ExperimentConfig,
    methods: &[Method],
) -> Result<ExperimentReport> {
    let started = Instant::now();
    let grid = cfg.grid()?;
    let truth = initial.build(grid)?;
    let op = ForwardOperator::new(cfg.model, grid)?;
    let seeds = cfg.seeds();
    if seeds.is_empty() {
        return Err(domain("at least one run is required"));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| -> Result<SeedRun> {
            let data = make_dataset(&truth, &op, cfg.delta, seed)?;
            let solver = cfg.solver(&op, data.realized_delta);
            let methods = methods
                .iter()
                .map(|&m| run_method(m, &data, &solver, &op).map(|(_, r)| r))
                .collect::<Result<Vec<_>>>()?;
            Ok(SeedRun {
                seed,
                realized_delta: data.realized_delta,
                methods,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rel_err_by_method = BTreeMap::new();
    for &m in methods {
        let errs: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.methods.iter().filter(|x| x.method == m).map(|x| x.rel_err))
            .collect();
        rel_err_by_method.insert(m, errs.iter().sum::<f64>() / errs.len() as f64);
    }
    let m_stop = median(
        runs.iter()
            .flat_map(|r| r.methods.iter().filter(|x| x.method == Method::VarTv).map(|x| x.m_stop))
            .collect(),
    );
    Ok(ExperimentReport {
        name: name.to_string(),
        params: *cfg,
        rel_err_by_method,
        m_stop,
        seeds,
        runs,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

/// Gaussian initial state, `α = 0.6`, `β = 1`, `T = 1` unless overridden.
pub fn run_example1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment("example1", InitialField::Gaussian, cfg, &Method::ALL)
}

/// Shepp-Logan initial state, `α = 0.6`, `β = 0.9`, `T = 1` unless overridden.
pub fn run_example2(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment("example2", InitialField::SheppLogan, cfg, &Method::ALL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lambda: f64,
    pub m_stop: usize,
    pub product: f64,
    pub stopped_by: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub params: ExperimentConfig,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// Largest relative deviation of `λ·M` from the mean of the products.
    pub fn spread(&self) -> f64 {
        let mean = self.rows.iter().map(|r| r.product).sum::<f64>() / self.rows.len() as f64;
        self.rows
            .iter()
            .map(|r| (r.product - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    /// Largest pairwise ratio `max(λM) / min(λM) - 1`.
    pub fn pairwise_spread(&self) -> f64 {
        let products = self.rows.iter().map(|r| r.product);
        let hi = products.clone().fold(f64::MIN, f64::max);
        let lo = products.fold(f64::MAX, f64::min);
        hi / lo - 1.0
    }
}

/// Runs the variable-exponent solver at `λ`, `λ/4`, `λ/16` on the Gaussian
/// example with one noise realization. `λ̃` is resolved once from `cfg.lambda`
/// and held fixed so that only the fidelity weight changes.
pub fn lambda_scaling_check(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    if !(cfg.delta > 0.0) {
        return Err(domain("lambda scaling needs a positive noise level"));
    }
    let grid = cfg.grid()?;
    let op = ForwardOperator::new(cfg.model, grid)?;
    let truth = gaussian_initial(grid);
    let seed = cfg.base_seed;
    let data = make_dataset(&truth, &op, cfg.delta, seed)?;
    let lambda_tilde = cfg.resolved_lambda_tilde(&op);
    let rows = [1.0, 4.0, 16.0]
        .par_iter()
        .map(|&div| -> Result<ScalingRow> {
            let scaled = ExperimentConfig {
                lambda: cfg.lambda / div,
                lambda_tilde: Some(lambda_tilde),
                ..*cfg
            };
            let solver = scaled.solver(&op, data.realized_delta);
            let result = modified_bregman_with(&data.noisy, &solver, &op)?;
            Ok(ScalingRow {
                lambda: scaled.lambda,
                m_stop: result.m_stop,
                product: scaled.lambda * result.m_stop as f64,
                stopped_by: result.stopped_by,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingReport {
        params: *cfg,
        seed,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub rel_err: f64,
    pub m_stop: usize,
}

/// `count` equispaced orders on `[lo, hi]`, endpoints included.
pub fn alpha_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![hi],
        _ => (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

/// Last fractional order before the integer one in [`sweep_alphas`].
pub const SWEEP_LAST_FRACTIONAL: f64 = 0.99;

/// `count - 1` equispaced orders on `[0.5, 0.99]` followed by `α = 1`, so the
/// jump between the fractional and the integer model is always resolved.
pub fn sweep_alphas(count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![1.0; count];
    }
    let mut a = alpha_grid(0.5, SWEEP_LAST_FRACTIONAL, count - 1);
    a.push(1.0);
    a
}

/// Inverts phantom data for each order in `alphas` (with `cfg.model.beta`
/// and `cfg.model.final_time`) using one noise seed; sorted by `α`.
pub fn alpha_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<AlphaPoint>> {
    let grid = cfg.grid()?;
    let truth = shepp_logan_phantom(grid)?;
    let mut points = alphas
        .par_iter()
        .map(|&alpha| -> Result<AlphaPoint> {
            let model = ModelParams::new(alpha, cfg.model.beta, cfg.model.final_time)?;
            let op = ForwardOperator::new(model, grid)?;
            let data = make_dataset(&truth, &op, cfg.delta, cfg.base_seed)?;
            let run_cfg = ExperimentConfig { model, ..*cfg };
            let solver = run_cfg.solver(&op, data.realized_delta);
            let (_, run) = run_method(Method::VarTv, &data, &solver, &op)?;
            Ok(AlphaPoint {
                alpha,
                rel_err: run.rel_err,
                m_stop: run.m_stop,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(points)
}

pub fn alpha_sweep_csv(points: &[AlphaPoint]) -> String {
    let mut out = String::from("alpha,rel_err,m_stop\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.alpha, p.rel_err, p.m_stop));
    }
    out
}
