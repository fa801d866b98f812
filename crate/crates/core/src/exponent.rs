//! Spatially varying exponent `p̃(x) ∈ [1, 2]` and the induced three-way
//! split of the grid.
//!
//! The surrogate used by the solver marks edges of the current iterate with
//! a Canny-style detector and blurs the binary mask:
//! `p̃ = 2 - G_δ̃ * E(u)`. Pixels on or next to an edge get exponents near 1
//! (total variation), smooth regions keep 2 (quadratic gradient penalty).

use std::collections::VecDeque;

use ndarray::{Array2, Zip};

use crate::error::{domain, Result};
use crate::grid::{gradient, ScalarField};

/// Fraction of nonzero gradient magnitudes below the strong-edge threshold.
pub const HIGH_PERCENTILE: f64 = 0.9;
/// Weak threshold as a fraction of the strong one.
pub const LOW_RATIO: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExponentConfig {
    /// Standard deviation of the smoothing kernel, in pixels.
    pub delta_tilde: f64,
    /// Width of the bands `[1, 1+ε)` and `(2-ε, 2]`.
    pub epsilon: f64,
    /// Saturation level `M` of the `P_M` polynomial.
    pub cap_m: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self {
            delta_tilde: 0.4,
            epsilon: 0.1,
            cap_m: 1.0,
        }
    }
}

impl ExponentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_tilde > 0.0) {
            return Err(domain("delta_tilde must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(domain("epsilon must lie in (0, 1/2)"));
        }
        if !(self.cap_m > 0.0) {
            return Err(domain("cap M must be positive"));
        }
        Ok(())
    }
}

/// Masks of `Ω₁ = {p̃ < 1+ε}`, `Ω₂ = {1+ε ≤ p̃ ≤ 2-ε}`, `Ω₃ = {p̃ > 2-ε}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPartition {
    pub mask1: Array2<bool>,
    pub mask2: Array2<bool>,
    pub mask3: Array2<bool>,
}

impl DomainPartition {
    /// Everything in one region, used when the exponent is frozen.
    pub fn uniform(n: usize, region: usize) -> Self {
        let on = Array2::from_elem((n, n), true);
        let off = Array2::from_elem((n, n), false);
        match region {
            1 => Self { mask1: on, mask2: off.clone(), mask3: off },
            2 => Self { mask1: off.clone(), mask2: on, mask3: off },
            _ => Self { mask1: off.clone(), mask2: off, mask3: on },
        }
    }

    pub fn counts(&self) -> [usize; 3] {
        let c = |m: &Array2<bool>| m.iter().filter(|&&b| b).count();
        [c(&self.mask1), c(&self.mask2), c(&self.mask3)]
    }
}

// Separable correlation with a normalized kernel. `wrap` selects periodic
// indexing, otherwise indices are clamped to the border.
fn separable_blur(values: &Array2<f64>, kernel: &[f64], wrap: bool) -> Array2<f64> {
    let n = values.nrows() as isize;
    let radius = (kernel.len() / 2) as isize;
    let index = |k: isize| -> usize {
        if wrap {
            k.rem_euclid(n) as usize
        } else {
            k.clamp(0, n - 1) as usize
        }
    };
    let rows: Array2<f64> = Array2::from_shape_fn(values.dim(), |(i, j)| {
        kernel
            .iter()
            .enumerate()
            .map(|(t, w)| w * values[(index(i as isize + t as isize - radius), j)])
            .sum()
    });
    Array2::from_shape_fn(values.dim(), |(i, j)| {
        kernel
            .iter()
            .enumerate()
            .map(|(t, w)| w * rows[(i, index(j as isize + t as isize - radius))])
            .sum()
    })
}

/// Normalized 1-D Gaussian truncated at `4σ` (`σ` in pixels).
pub fn gaussian_kernel(sigma_px: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_px).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Periodic convolution with a normalized Gaussian of standard deviation
/// `sigma` (physical units), truncated at `4σ`. Preserves the grid mean and
/// satisfies the discrete maximum principle.
pub fn gaussian_smooth(f: &ScalarField, sigma: f64) -> Result<ScalarField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("smoothing sigma = {sigma} must be positive")));
    }
    let kernel = gaussian_kernel(sigma / f.grid().spacing());
    ScalarField::from_array(f.grid(), separable_blur(f.values(), &kernel, true))
}

fn percentile(mut v: Vec<f64>, q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Binary edge map: Gaussian pre-smoothing (σ = 1 pixel), central
/// differences, non-maximum suppression along the quantized gradient
/// direction and hysteresis between percentile thresholds.
pub fn detect_edges(u: &ScalarField) -> ScalarField {
    let n = u.grid().n();
    let smooth = separable_blur(u.values(), &gaussian_kernel(1.0), false);
    let at = |i: isize, j: isize| smooth[(i.clamp(0, n as isize - 1) as usize, j.clamp(0, n as isize - 1) as usize)];
    let mut gx = Array2::zeros((n, n));
    let mut gy = Array2::zeros((n, n));
    for i in 0..n as isize {
        for j in 0..n as isize {
            let hx = if i == 0 || i == n as isize - 1 { 1.0 } else { 0.5 };
            let hy = if j == 0 || j == n as isize - 1 { 1.0 } else { 0.5 };
            gx[(i as usize, j as usize)] = hx * (at(i + 1, j) - at(i - 1, j));
            gy[(i as usize, j as usize)] = hy * (at(i, j + 1) - at(i, j - 1));
        }
    }
    let mag = Zip::from(&gx).and(&gy).map_collect(|a: &f64, b: &f64| a.hypot(*b));
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let mut edges = Array2::zeros((n, n));
    if peak == 0.0 {
        return ScalarField::from_raw(u.grid(), edges);
    }
    let floor = 1e-12 * peak;
    let nonzero: Vec<f64> = mag.iter().copied().filter(|&m| m > floor).collect();
    let high = percentile(nonzero, HIGH_PERCENTILE).unwrap_or(peak);
    let low = LOW_RATIO * high;

    let m_at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            0.0
        } else {
            mag[(i as usize, j as usize)]
        }
    };
    // 0: along first axis, 1: diagonal (+,+), 2: along second axis, 3: diagonal (+,-)
    let mut thin = Array2::from_elem((n, n), false);
    for i in 0..n {
        for j in 0..n {
            let m = mag[(i, j)];
            if m <= floor || m < low {
                continue;
            }
            let angle = gy[(i, j)].atan2(gx[(i, j)]).to_degrees().rem_euclid(180.0);
            let (di, dj) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (1, -1)
            };
            let (ii, jj) = (i as isize, j as isize);
            if m >= m_at(ii + di, jj + dj) && m >= m_at(ii - di, jj - dj) {
                thin[(i, j)] = true;
            }
        }
    }
    let mut queue = VecDeque::new();
    for ((i, j), &keep) in thin.indexed_iter() {
        if keep && mag[(i, j)] >= high {
            edges[(i, j)] = 1.0;
            queue.push_back((i, j));
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                    continue;
                }
                let (a, b) = (a as usize, b as usize);
                if thin[(a, b)] && edges[(a, b)] == 0.0 {
                    edges[(a, b)] = 1.0;
                    queue.push_back((a, b));
                }
            }
        }
    }
    ScalarField::from_raw(u.grid(), edges)
}

/// Marks every pixel whose forward-difference stencil `(i,j), (i+1,j),
/// (i,j+1)` meets an edge pixel. The detector may place an edge on either
/// side of a jump, while `∇u` stores the jump at the lower index.
pub fn stencil_cover(edges: &ScalarField) -> ScalarField {
    let n = edges.grid().n();
    let e = edges.values();
    let hit = |i: usize, j: usize| i < n && j < n && e[(i, j)] > 0.0;
    ScalarField::from_index_fn(edges.grid(), |i, j| {
        if hit(i, j) || hit(i + 1, j) || hit(i, j + 1) {
            1.0
        } else {
            0.0
        }
    })
}

/// `p̃ = 2 - G_δ̃ * E(u)` with `E` widened by [`stencil_cover`]; `δ̃` in pixels.
pub fn exponent_from_edges(u: &ScalarField, cfg: &ExponentConfig) -> Result<ScalarField> {
    cfg.validate()?;
    let edges = stencil_cover(&detect_edges(u));
    let blurred = gaussian_smooth(&edges, cfg.delta_tilde * u.grid().spacing())?;
    Ok(blurred.map(|e| (2.0 - e).clamp(1.0, 2.0)))
}

/// `P_M(s) = 2 - 10 s³/M³ + 15 s⁴/M⁴ - 6 s⁵/M⁵` on `[0, M]`, `1` beyond.
pub fn pm_polynomial(s: f64, cap_m: f64) -> f64 {
    if s >= cap_m {
        return 1.0;
    }
    let r = s.max(0.0) / cap_m;
    let r3 = r * r * r;
    2.0 - 10.0 * r3 + 15.0 * r3 * r - 6.0 * r3 * r * r
}

/// `p̃ = P_M(|∇(G_δ̃ * u)|²)`.
pub fn exponent_pm(u: &ScalarField, cfg: &ExponentConfig) -> Result<ScalarField> {
    cfg.validate()?;
    let grad = gradient(&gaussian_smooth(u, cfg.delta_tilde * u.grid().spacing())?);
    let values = Zip::from(&grad.x)
        .and(&grad.y)
        .map_collect(|a, b| pm_polynomial(a * a + b * b, cfg.cap_m).clamp(1.0, 2.0));
    ScalarField::from_array(u.grid(), values)
}

pub fn partition_domain(p_tilde: &ScalarField, epsilon: f64) -> Result<DomainPartition> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(domain("epsilon must lie in (0, 1/2)"));
    }
    let p = p_tilde.values();
    Ok(DomainPartition {
        mask1: p.mapv(|v| v < 1.0 + epsilon),
        mask2: p.mapv(|v| (1.0 + epsilon..=2.0 - epsilon).contains(&v)),
        mask3: p.mapv(|v| v > 2.0 - epsilon),
    })
}
