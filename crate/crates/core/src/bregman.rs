//! Outer Bregman iteration with an exponent map rebuilt at every step, the
//! discrepancy stopping rule, and the TV / Tikhonov baselines.
//!
//! The subgradient of the Bregman distance is never formed explicitly. As in
//! the add-back-the-residual form of the iteration, it is carried by the
//! shifted data `ĝ^{m+1} = ĝ^m + (ĝ^δ - Ŝû^{m+1})`.

use std::time::Instant;

use ndarray::Zip;

use crate::error::{domain, Error, Result};
use crate::exponent::{exponent_from_edges, exponent_pm, partition_domain, ExponentConfig};
use crate::forward::ForwardOperator;
use crate::grid::{difference_symbols, gradient, inverse_transform, transform, ScalarField, SpectrumField, VectorField};
use crate::special::ModelParams;
use crate::subproblems::{solve_w1, solve_w2, solve_w3, SplitConfig, USolver};

/// How `p̃^m` is obtained at each outer step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ExponentMode {
    /// `2 - G_δ̃ * E(u^m)` (edge surrogate).
    Edges,
    /// `P_M(|∇(G_δ̃ * u^m)|²)`.
    PowerMap,
    /// Constant exponent; `Fixed(1.0)` is total variation.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub model: ModelParams,
    pub split: SplitConfig,
    pub exponent: ExponentConfig,
    pub exponent_mode: ExponentMode,
    /// Discrepancy factor, `τ > 1`.
    pub tau: f64,
    /// Noise level `δ` used by the stopping rule.
    pub delta: f64,
    pub m_max: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.split.validate()?;
        self.exponent.validate()?;
        if !(self.tau > 1.0) {
            return Err(domain(format!("tau = {} must exceed 1", self.tau)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(domain("delta must be finite and nonnegative"));
        }
        if self.m_max == 0 || self.k_max == 0 {
            return Err(domain("m_max and k_max must be at least 1"));
        }
        if let ExponentMode::Fixed(p) = self.exponent_mode {
            if !(1.0..=2.0).contains(&p) {
                return Err(domain(format!("fixed exponent {p} must lie in [1, 2]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    pub m: usize,
    /// `‖Ŝû^m - ĝ^δ‖`.
    pub residual: f64,
    /// `∫|∇u^m|^{p̃^m}`; zero for the final record, which has no exponent.
    pub objective: f64,
    pub accepted_w2_steps: usize,
    /// Pixel counts of `Ω₁, Ω₂, Ω₃` used for the step out of `u^m`.
    pub partition: [usize; 3],
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopReason {
    Discrepancy,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub u_rec: ScalarField,
    pub records: Vec<IterationRecord>,
    pub stopped_by: StopReason,
    /// First `m` with `‖Ŝû^m - ĝ^δ‖ ≤ τδ`, or `m_max`.
    pub m_stop: usize,
    /// `τδ`; zero means the rule could never fire.
    pub threshold: f64,
}

impl InversionResult {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }
}

/// `‖Ŝû - ĝ^δ‖` computed in the frequency domain.
pub fn residual_norm(u: &ScalarField, g_delta_hat: &SpectrumField, s_hat: &ScalarField) -> Result<f64> {
    spectral_residual(&transform(u), g_delta_hat, s_hat)
}

fn spectral_residual(u_hat: &SpectrumField, g_hat: &SpectrumField, s_hat: &ScalarField) -> Result<f64> {
    let grid = g_hat.grid();
    if u_hat.grid() != grid || s_hat.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let sum = Zip::from(u_hat.values())
        .and(g_hat.values())
        .and(s_hat.values())
        .fold(0.0, |acc, &u, &g, &s| acc + (u * s - g).norm_sqr());
    let n2 = (grid.n() * grid.n()) as f64;
    Ok((grid.cell_area() * sum / n2).sqrt())
}

/// `dx² Σ |w|^{p̃}`.
pub fn gradient_power_sum(w: &VectorField, p_tilde: &ScalarField) -> f64 {
    let s = Zip::from(&w.x)
        .and(&w.y)
        .and(p_tilde.values())
        .fold(0.0, |acc, &a, &b, &p| acc + a.hypot(b).powf(p));
    s * w.grid().cell_area()
}

/// `∫ |∇u|^{p̃} dx` with the zero-boundary forward differences.
pub fn variable_tv_objective(u: &ScalarField, p_tilde: &ScalarField) -> f64 {
    gradient_power_sum(&gradient(u), p_tilde)
}

/// Right-hand side `2/(λM) (‖∇u*‖ + |Ω|) + δ²` of the residual estimate after `M` steps.
pub fn residual_bound(lambda: f64, m: usize, grad_norm: f64, area: f64, delta: f64) -> f64 {
    2.0 / (lambda * m as f64) * (grad_norm + area) + delta * delta
}

struct Step {
    u_hat: SpectrumField,
    objective: f64,
    accepted: usize,
    partition: [usize; 3],
}

// Shared outer loop: `inner` maps (m, u^m, ĝ^m) to û^{m+1}.
fn outer_loop(
    g_delta: &ScalarField,
    cfg: &SolverConfig,
    op: &ForwardOperator,
    mut inner: impl FnMut(usize, &ScalarField, &SpectrumField) -> Result<Step>,
) -> Result<InversionResult> {
    cfg.validate()?;
    if op.grid() != g_delta.grid() {
        return Err(Error::GridMismatch);
    }
    if op.model() != cfg.model {
        return Err(domain("forward operator was built for a different model"));
    }
    let s_hat = op.symbol();
    let g_delta_hat = transform(g_delta);
    let mut g_m_hat = g_delta_hat.clone();
    let mut u = ScalarField::zeros(g_delta.grid());
    let mut u_hat = SpectrumField::zeros(g_delta.grid());
    let threshold = cfg.tau * cfg.delta;
    let mut records = Vec::new();

    for m in 0..=cfg.m_max {
        let residual = spectral_residual(&u_hat, &g_delta_hat, s_hat)?;
        if !residual.is_finite() {
            return Err(Error::Divergence { step: m, trace: records });
        }
        let done = if residual <= threshold {
            Some(StopReason::Discrepancy)
        } else if m == cfg.m_max {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stopped_by) = done {
            records.push(IterationRecord {
                m,
                residual,
                objective: 0.0,
                accepted_w2_steps: 0,
                partition: [0; 3],
                wall_ms: 0,
            });
            return Ok(InversionResult {
                u_rec: u,
                records,
                stopped_by,
                m_stop: m,
                threshold,
            });
        }
        let started = Instant::now();
        let step = inner(m, &u, &g_m_hat)?;
        u_hat = step.u_hat;
        u = inverse_transform(&u_hat)?;
        records.push(IterationRecord {
            m,
            residual,
            objective: step.objective,
            accepted_w2_steps: step.accepted,
            partition: step.partition,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        if !u.is_finite() {
            return Err(Error::Divergence { step: m + 1, trace: records });
        }
        Zip::from(g_m_hat.values_mut())
            .and(g_delta_hat.values())
            .and(u_hat.values())
            .and(s_hat.values())
            .for_each(|gm, &gd, &uh, &s| *gm += gd - uh * s);
    }
    unreachable!("loop returns at m = m_max")
}

/// Variable-exponent TV inversion by the modified Bregman iteration.
pub fn modified_bregman(g_delta: &ScalarField, cfg: &SolverConfig) -> Result<InversionResult> {
    cfg.validate()?;
    let op = ForwardOperator::new(cfg.model, g_delta.grid())?;
    modified_bregman_with(g_delta, cfg, &op)
}

/// As [`modified_bregman`] with a prebuilt forward operator.
pub fn modified_bregman_with(
    g_delta: &ScalarField,
    cfg: &SolverConfig,
    op: &ForwardOperator,
) -> Result<InversionResult> {
    let grid = g_delta.grid();
    let usolver = USolver::new(grid);
    let split = cfg.split;
    let s_hat = op.symbol().clone();
    outer_loop(g_delta, cfg, op, |m, u, g_m_hat| {
        // the first exponent map is read off the data itself
        let source = if m == 0 { g_delta } else { u };
        let p = match cfg.exponent_mode {
            ExponentMode::Edges => exponent_from_edges(source, &cfg.exponent)?,
            ExponentMode::PowerMap => exponent_pm(source, &cfg.exponent)?,
            ExponentMode::Fixed(v) => ScalarField::constant(grid, v),
        };
        let part = partition_domain(&p, cfg.exponent.epsilon)?;
        let counts = part.counts();
        let objective = variable_tv_objective(u, &p);
        let mut accepted = 0;
        let mut uk = u.clone();
        let mut uk_hat = None;
        for _ in 0..cfg.k_max {
            let grad = gradient(&uk);
            let mut w = solve_w1(&grad, &part.mask1, split.lambda_tilde);
            if counts[1] > 0 {
                let w2 = solve_w2(&grad, &p, &part.mask2, &split)?;
                accepted += w2.accepted;
                w = w.add(&w2.w)?;
            }
            if counts[2] > 0 {
                w = w.add(&solve_w3(&grad, &part.mask3, split.lambda_tilde))?;
            }
            let next = usolver.solve_spectrum(&w, g_m_hat, &s_hat, split.lambda, split.lambda_tilde)?;
            uk = inverse_transform(&next)?;
            uk_hat = Some(next);
        }
        Ok(Step {
            u_hat: uk_hat.expect("k_max >= 1"),
            objective,
            accepted,
            partition: counts,
        })
    })
}

/// Bregman-iterated total variation: the same driver with `p̃ ≡ 1`.
pub fn tv_solve(g_delta: &ScalarField, cfg: &SolverConfig) -> Result<InversionResult> {
    let cfg = SolverConfig {
        exponent_mode: ExponentMode::Fixed(1.0),
        ..*cfg
    };
    modified_bregman(g_delta, &cfg)
}

pub fn tv_solve_with(g_delta: &ScalarField, cfg: &SolverConfig, op: &ForwardOperator) -> Result<InversionResult> {
    let cfg = SolverConfig {
        exponent_mode: ExponentMode::Fixed(1.0),
        ..*cfg
    };
    modified_bregman_with(g_delta, &cfg, op)
}

/// Closed-form minimizer of `‖∇u‖² + (λ/2)‖Ŝû - ĝ‖²` (periodic differences):
/// `û = λŜĝ / (λŜ² + 2|d|²)`.
pub fn tikhonov_spectrum(g_hat: &SpectrumField, s_hat: &ScalarField, lambda: f64) -> Result<SpectrumField> {
    let grid = g_hat.grid();
    if s_hat.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let (d1, d2) = difference_symbols(grid);
    let mut out = g_hat.clone();
    let mut bad = false;
    Zip::from(out.values_mut())
        .and(s_hat.values())
        .and(d1.values())
        .and(d2.values())
        .for_each(|o, &s, a, b| {
            let den = lambda * s * s + 2.0 * (a.norm_sqr() + b.norm_sqr());
            if den > 0.0 {
                *o *= lambda * s / den;
            } else {
                bad = true;
            }
        });
    if bad {
        return Err(Error::InternalInvariant("zero denominator in the Tikhonov solve".into()));
    }
    Ok(out)
}

/// One Tikhonov solve against the data with weight `cfg.split.lambda`.
pub fn tikhonov_solve(g_delta: &ScalarField, cfg: &SolverConfig) -> Result<ScalarField> {
    cfg.validate()?;
    let op = ForwardOperator::new(cfg.model, g_delta.grid())?;
    let spec = tikhonov_spectrum(&transform(g_delta), op.symbol(), cfg.split.lambda)?;
    inverse_transform(&spec)
}

/// Bregman-iterated Tikhonov regularization with the discrepancy stop.
pub fn tikhonov_bregman(g_delta: &ScalarField, cfg: &SolverConfig) -> Result<InversionResult> {
    cfg.validate()?;
    let op = ForwardOperator::new(cfg.model, g_delta.grid())?;
    tikhonov_bregman_with(g_delta, cfg, &op)
}

pub fn tikhonov_bregman_with(
    g_delta: &ScalarField,
    cfg: &SolverConfig,
    op: &ForwardOperator,
) -> Result<InversionResult> {
    let s_hat = op.symbol().clone();
    let lambda = cfg.split.lambda;
    outer_loop(g_delta, cfg, op, |_, u, g_m_hat| {
        let grad = gradient(u);
        let objective = grad.norm().powi(2);
        Ok(Step {
            u_hat: tikhonov_spectrum(g_m_hat, &s_hat, lambda)?,
            objective,
            accepted: 0,
            partition: [0; 3],
        })
    })
}
