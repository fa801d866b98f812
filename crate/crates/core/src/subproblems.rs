//! Inner problems of the splitting scheme for
//! `min_{u,w} ∫|w|^{p̃} + (λ/2)‖Ŝû - ĝ‖² + (λ̃/2)‖w - ∇u‖²`.
//!
//! For fixed `u* ` the `w`-problem decouples pixelwise over the three regions
//! of the exponent partition; for fixed `w*` the `u`-problem is a quadratic
//! diagonalized by the DFT.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::grid::{
    difference_symbols, inverse_transform, transform_vector, Grid, ScalarField, SpectrumField, VectorField,
};

/// `|w|` is evaluated as `sqrt(|w|² + η²)` inside the `Ω₂` gradient.
pub const MAGNITUDE_REGULARIZATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitConfig {
    /// Fidelity weight `λ`.
    pub lambda: f64,
    /// Splitting penalty `λ̃`.
    pub lambda_tilde: f64,
    /// Initial step of the `Ω₂` descent.
    pub dt0: f64,
    /// Step adaptation factor: accept ⇒ `Δt·(1+s)`, reject ⇒ `Δt·(1-s)`.
    pub s: f64,
    /// Cap on descent steps per `Ω₂` solve.
    pub ell_max: usize,
    /// Stop the descent once an accepted step moves `w₂` by at most this much.
    pub tol: f64,
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(domain("lambda must be positive"));
        }
        if !(self.lambda_tilde > 0.0 && self.lambda_tilde.is_finite()) {
            return Err(domain("lambda_tilde must be positive"));
        }
        if !(self.dt0 > 0.0) {
            return Err(domain("initial step must be positive"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(domain("step factor s must lie in (0, 1)"));
        }
        if self.ell_max == 0 {
            return Err(domain("ell_max must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(domain("tol must be positive"));
        }
        Ok(())
    }
}

/// Isotropic soft shrinkage of `∇u*` with threshold `1/λ̃` on `Ω₁`.
pub fn solve_w1(grad_u: &VectorField, mask1: &Array2<bool>, lambda_tilde: f64) -> VectorField {
    let threshold = 1.0 / lambda_tilde;
    let mut out = VectorField::zeros(grad_u.grid());
    Zip::from(&mut out.x)
        .and(&mut out.y)
        .and(&grad_u.x)
        .and(&grad_u.y)
        .and(mask1)
        .for_each(|ox, oy, &gx, &gy, &m| {
            if !m {
                return;
            }
            let mag = gx.hypot(gy);
            if mag > threshold {
                let f = (mag - threshold) / mag;
                *ox = f * gx;
                *oy = f * gy;
            }
        });
    out
}

/// Minimizer of `|w|² + (λ̃/2)|w - ∇u*|²` on `Ω₃`: `w = λ̃ ∇u* / (λ̃ + 2)`.
pub fn solve_w3(grad_u: &VectorField, mask3: &Array2<bool>, lambda_tilde: f64) -> VectorField {
    let f = lambda_tilde / (lambda_tilde + 2.0);
    let mut out = VectorField::zeros(grad_u.grid());
    Zip::from(&mut out.x)
        .and(&mut out.y)
        .and(&grad_u.x)
        .and(&grad_u.y)
        .and(mask3)
        .for_each(|ox, oy, &gx, &gy, &m| {
            if m {
                *ox = f * gx;
                *oy = f * gy;
            }
        });
    out
}

/// `J(w₂) = dx² Σ_{Ω₂} |w₂|^{p̃} + (λ̃/2)|w₂ - ∇u*|²`.
pub fn sub2_objective(
    w2: &VectorField,
    grad_u: &VectorField,
    p_tilde: &ScalarField,
    mask2: &Array2<bool>,
    lambda_tilde: f64,
) -> f64 {
    let mut acc = 0.0;
    Zip::from(&w2.x)
        .and(&w2.y)
        .and(&grad_u.x)
        .and(&grad_u.y)
        .and(p_tilde.values())
        .and(mask2)
        .for_each(|&wx, &wy, &gx, &gy, &p, &m| {
            if m {
                let mag = wx.hypot(wy);
                let fit = (wx - gx).powi(2) + (wy - gy).powi(2);
                acc += mag.powf(p) + 0.5 * lambda_tilde * fit;
            }
        });
    acc * w2.grid().cell_area()
}

/// Result of one `Ω₂` descent.
#[derive(Debug, Clone)]
pub struct W2Solve {
    pub w: VectorField,
    pub accepted: usize,
    pub rejected: usize,
    pub objective_start: f64,
    pub objective_end: f64,
    pub final_step: f64,
}

/// Adaptive-step gradient descent on `J` starting from the masked `∇u*`.
///
/// At most `ell_max` trial steps are taken. A trial is accepted only if it
/// strictly lowers `J`, which grows the step by `1+s`; otherwise the step
/// shrinks by `1-s` and `w₂` is kept. The loop ends early once an accepted
/// step changes `w₂` by at most `tol` in `L²`.
pub fn solve_w2(
    grad_u: &VectorField,
    p_tilde: &ScalarField,
    mask2: &Array2<bool>,
    cfg: &SplitConfig,
) -> Result<W2Solve> {
    let grid = grad_u.grid();
    let lt = cfg.lambda_tilde;
    let eta2 = MAGNITUDE_REGULARIZATION * MAGNITUDE_REGULARIZATION;
    let mut w = VectorField::zeros(grid);
    Zip::from(&mut w.x)
        .and(&mut w.y)
        .and(&grad_u.x)
        .and(&grad_u.y)
        .and(mask2)
        .for_each(|wx, wy, &gx, &gy, &m| {
            if m {
                *wx = gx;
                *wy = gy;
            }
        });
    let objective_start = sub2_objective(&w, grad_u, p_tilde, mask2, lt);
    let mut objective = objective_start;
    let mut dt = cfg.dt0;
    let (mut accepted, mut rejected) = (0, 0);

    let residual = |w: &VectorField| -> Result<VectorField> {
        let mut r = VectorField::zeros(grid);
        let p = p_tilde.values();
        for ((i, j), &m) in mask2.indexed_iter() {
            if m {
                let (wx, wy) = (w.x[(i, j)], w.y[(i, j)]);
                let mag = (wx * wx + wy * wy + eta2).sqrt();
                let c = p[(i, j)] * mag.powf(p[(i, j)] - 2.0);
                r.x[(i, j)] = c * wx + lt * (wx - grad_u.x[(i, j)]);
                r.y[(i, j)] = c * wy + lt * (wy - grad_u.y[(i, j)]);
            }
        }
        if !r.is_finite() {
            return Err(Error::NumericalDegeneracy(
                "non-finite residual in the variable-exponent subproblem".into(),
            ));
        }
        Ok(r)
    };

    let mut r = residual(&w)?;
    for _ in 0..cfg.ell_max {
        let trial = VectorField::from_raw(grid, &w.x - &(dt * &r.x), &w.y - &(dt * &r.y));
        let trial_objective = sub2_objective(&trial, grad_u, p_tilde, mask2, lt);
        if trial_objective < objective {
            let moved = trial.sub(&w)?.norm();
            w = trial;
            objective = trial_objective;
            dt *= 1.0 + cfg.s;
            accepted += 1;
            if moved <= cfg.tol {
                break;
            }
            r = residual(&w)?;
        } else {
            dt *= 1.0 - cfg.s;
            rejected += 1;
        }
    }
    Ok(W2Solve {
        w,
        accepted,
        rejected,
        objective_start,
        objective_end: objective,
        final_step: dt,
    })
}

/// Periodic difference symbols cached for repeated `u`-solves on one grid.
#[derive(Debug, Clone)]
pub struct USolver {
    d1: SpectrumField,
    d2: SpectrumField,
}

impl USolver {
    pub fn new(grid: Grid) -> Self {
        let (d1, d2) = difference_symbols(grid);
        Self { d1, d2 }
    }

    /// `û = (λŜĝ + λ̃ (d̄₁ŵ₁ + d̄₂ŵ₂)) / (λŜ² + λ̃ (|d₁|² + |d₂|²))`.
    pub fn solve_spectrum(
        &self,
        w_star: &VectorField,
        g_hat: &SpectrumField,
        s_hat: &ScalarField,
        lambda: f64,
        lambda_tilde: f64,
    ) -> Result<SpectrumField> {
        let grid = g_hat.grid();
        if w_star.grid() != grid || s_hat.grid() != grid || self.d1.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let (w1, w2) = transform_vector(w_star);
        let mut bad = false;
        let out = Array2::from_shape_fn((grid.n(), grid.n()), |ix| {
            let s = s_hat.values()[ix];
            let (d1, d2) = (self.d1.values()[ix], self.d2.values()[ix]);
            let den = lambda * s * s + lambda_tilde * (d1.norm_sqr() + d2.norm_sqr());
            if den > 0.0 {
                (g_hat.values()[ix] * (lambda * s) + (d1.conj() * w1.values()[ix] + d2.conj() * w2.values()[ix]) * lambda_tilde)
                    / den
            } else {
                bad = true;
                Complex64::new(0.0, 0.0)
            }
        });
        if bad {
            return Err(Error::InternalInvariant("zero denominator in the u-update".into()));
        }
        Ok(SpectrumField::from_raw(grid, out))
    }
}

/// Exact minimizer of `(λ/2)‖Ŝû - ĝ‖² + (λ̃/2)‖w* - ∇u‖²` with periodic differences.
pub fn solve_u(
    w_star: &VectorField,
    g_m_hat: &SpectrumField,
    s_hat: &ScalarField,
    cfg: &SplitConfig,
    grid: Grid,
) -> Result<ScalarField> {
    let spec = USolver::new(grid).solve_spectrum(w_star, g_m_hat, s_hat, cfg.lambda, cfg.lambda_tilde)?;
    inverse_transform(&spec)
}
