//! The forward map `u ↦ F⁻¹(Ŝ û)` and synthetic measurement data.

use ndarray::Zip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::grid::{inverse_transform, transform, Grid, ScalarField, SpectrumField};
use crate::special::{spectral_multiplier, ModelParams};

/// Spectral symbol `Ŝ` of the solution operator tabulated on one grid.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    model: ModelParams,
    symbol: ScalarField,
}

impl ForwardOperator {
    pub fn new(model: ModelParams, grid: Grid) -> Result<Self> {
        let symbol = spectral_multiplier(model, &grid.frequency_magnitudes())?;
        Ok(Self { model, symbol })
    }

    pub fn model(&self) -> ModelParams {
        self.model
    }

    pub fn grid(&self) -> Grid {
        self.symbol.grid()
    }

    /// `Ŝ` in FFT order.
    pub fn symbol(&self) -> &ScalarField {
        &self.symbol
    }

    pub fn apply_spectrum(&self, u_hat: &SpectrumField) -> Result<SpectrumField> {
        if u_hat.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let mut out = u_hat.clone();
        Zip::from(out.values_mut())
            .and(self.symbol.values())
            .for_each(|c, &s| *c *= s);
        Ok(out)
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        inverse_transform(&self.apply_spectrum(&transform(u))?)
    }
}

/// `S u` for a single field; builds the symbol on the fly.
pub fn apply_forward(u: &ScalarField, model: ModelParams) -> Result<ScalarField> {
    ForwardOperator::new(model, u.grid())?.apply(u)
}

/// Multiplicative Gaussian noise `g + δ · Z · max(g)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

pub fn add_noise(g: &ScalarField, spec: NoiseSpec) -> Result<ScalarField> {
    if !(spec.delta >= 0.0) {
        return Err(domain(format!("noise level {} must be nonnegative", spec.delta)));
    }
    if spec.delta == 0.0 {
        return Ok(g.clone());
    }
    let amplitude = spec.delta * g.max();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = g.clone();
    for v in out.values_mut().iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += amplitude * z;
    }
    Ok(out)
}

/// `u(x) = exp(-|x|²)`.
pub fn gaussian_initial(grid: Grid) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| (-(x * x + y * y)).exp())
}

/// One ellipse of the phantom: intensity, semi-axes, center, rotation (degrees).
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    const fn new(intensity: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> Self {
        Self {
            intensity,
            a,
            b,
            x0,
            y0,
            phi_deg,
        }
    }

    /// Whether `(x, y)` in unit-square coordinates lies inside or on the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// Modified Shepp-Logan table (the default of Matlab's `phantom`).
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    Ellipse::new(-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    Ellipse::new(0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    Ellipse::new(0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    Ellipse::new(0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    Ellipse::new(0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    Ellipse::new(0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    Ellipse::new(0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Gray-level phantom on `[-L, L]²`, the unit square scaled by `L`, clipped to `[0, 1]`.
pub fn shepp_logan_phantom(grid: Grid) -> Result<ScalarField> {
    if grid.n() < 32 {
        return Err(domain(format!("phantom needs N >= 32, got {}", grid.n())));
    }
    let l = grid.half_width();
    Ok(ScalarField::from_fn(grid, |x1, x2| {
        let (x, y) = (x1 / l, x2 / l);
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        v.clamp(0.0, 1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_preserved() {
        let g = Grid::new(16, 3.0).unwrap();
        let model = ModelParams::new(0.6, 0.9, 1.0).unwrap();
        let out = apply_forward(&ScalarField::constant(g, 0.7), model).unwrap();
        for v in out.values() {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_mode_decays_exponentially() {
        // L = π gives unit frequency spacing, so wavenumber (1, 0) has |ξ| = 1
        let g = Grid::new(16, PI).unwrap();
        let model = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x, _| x.cos());
        let su = apply_forward(&u, model).unwrap();
        let e = (-1.0f64).exp();
        for (a, b) in su.values().iter().zip(u.values()) {
            assert_abs_diff_eq!(*a, e * b, epsilon = 1e-13);
        }
    }

    #[test]
    fn matches_direct_spectral_loop() {
        let g = Grid::new(16, 2.0).unwrap();
        let model = ModelParams::new(0.6, 0.9, 1.0).unwrap();
        let u = ScalarField::from_index_fn(g, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let su = apply_forward(&u, model).unwrap();
        let n = 16;
        let freq = g.frequencies();
        // O(N^4) forward DFT, multiply, O(N^4) inverse DFT
        let mut spec = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let ph = -2.0 * PI * ((a * i + b * j) as f64) / n as f64;
                        acc += u.values()[(i, j)] * Complex64::new(0.0, ph).exp();
                    }
                }
                let s = model.symbol(freq[a].hypot(freq[b])).unwrap();
                spec[a * n + b] = acc * s;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let ph = 2.0 * PI * ((a * i + b * j) as f64) / n as f64;
                        acc += spec[a * n + b] * Complex64::new(0.0, ph).exp();
                    }
                }
                assert_abs_diff_eq!(su.values()[(i, j)], acc.re / (n * n) as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn noise_is_deterministic() {
        let g = Grid::new(16, 1.0).unwrap();
        let f = gaussian_initial(g);
        let a = add_noise(&f, NoiseSpec { delta: 0.01, seed: 4 }).unwrap();
        let b = add_noise(&f, NoiseSpec { delta: 0.01, seed: 4 }).unwrap();
        let c = add_noise(&f, NoiseSpec { delta: 0.01, seed: 5 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(add_noise(&f, NoiseSpec { delta: 0.0, seed: 4 }).unwrap(), f);
        assert!(add_noise(&f, NoiseSpec { delta: -1.0, seed: 4 }).is_err());
    }

    #[test]
    fn noise_amplitude_statistics() {
        let g = Grid::new(256, 10.0).unwrap();
        let model = ModelParams::new(0.6, 1.0, 1.0).unwrap();
        let clean = apply_forward(&gaussian_initial(g), model).unwrap();
        let noisy = add_noise(&clean, NoiseSpec { delta: 0.005, seed: 1 }).unwrap();
        let diff = noisy.sub(&clean).unwrap();
        let n = diff.values().len() as f64;
        let mean = diff.values().sum() / n;
        let var = diff.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 0.005 * clean.max();
        assert!((var.sqrt() / target - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_samples() {
        let g = Grid::new(20, 10.0).unwrap();
        let u = gaussian_initial(g);
        // node 10 is the origin, node 11 is x = 1
        assert_eq!(u.values()[(10, 10)], 1.0);
        assert_abs_diff_eq!(u.values()[(11, 10)], (-1.0f64).exp(), epsilon = 1e-15);
        for i in 1..20 {
            for j in 1..20 {
                assert_eq!(u.values()[(i, j)], u.values()[(20 - i, 20 - j)]);
            }
        }
    }

    #[test]
    fn phantom_levels() {
        let g = Grid::new(256, 10.0).unwrap();
        let p = shepp_logan_phantom(g).unwrap();
        assert_eq!(p.values()[(0, 0)], 0.0);
        // origin: head (1.0) + brain (-0.8), nothing else covers (0, 0)
        let covering: f64 = SHEPP_LOGAN.iter().filter(|e| e.contains(0.0, 0.0)).map(|e| e.intensity).sum();
        assert_abs_diff_eq!(p.values()[(128, 128)], covering, epsilon = 1e-15);
        assert_abs_diff_eq!(covering, 0.2, epsilon = 1e-12);
        let mut levels: Vec<i64> = p.values().iter().map(|v| (v * 1e6).round() as i64).collect();
        levels.sort_unstable();
        levels.dedup();
        assert!(levels.len() <= 12, "{levels:?}");
        assert!(p.min() >= 0.0 && p.max() <= 1.0);
        assert!(shepp_logan_phantom(Grid::new(16, 1.0).unwrap()).is_err());
    }
}
