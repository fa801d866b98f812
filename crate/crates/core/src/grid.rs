//! Uniform periodic grid over `[-L, L]²`, the field types living on it,
//! 2-D discrete Fourier transforms and finite-difference operators.
//!
//! Conventions:
//!
//! * Node `(i, j)` sits at `(-L + i·dx, -L + j·dx)` with `dx = 2L/N`; the
//!   first array axis is `x₁`.
//! * The forward DFT is unnormalized, the inverse carries `1/N²`.
//!   Spectra are stored in natural FFT order; index `k` has angular
//!   frequency `2π k'/(N dx)` with `k' = k` for `k < N/2` and `k - N` otherwise.
//! * `L²` norms are quadrature sums weighted by `dx²`, so
//!   `‖f‖² = dx² Σ f² = (dx²/N²) Σ |F|²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Error, Result};

/// Inverse transforms whose imaginary part exceeds this fraction of the
/// spectrum norm are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(domain(format!("grid needs at least 2 points per axis, got {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(domain(format!("half width L = {half_width} must be positive")));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Grid spacing `dx = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Quadrature weight `dx²` of one node.
    pub fn cell_area(&self) -> f64 {
        let dx = self.spacing();
        dx * dx
    }

    /// `|Ω| = (2L)²`.
    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Largest resolvable angular frequency `π/dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Signed integer wavenumber of FFT index `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 || (n % 2 == 1 && k == n / 2) {
            k
        } else {
            k - n
        }
    }

    /// Angular frequency of FFT index `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        2.0 * PI * self.wavenumber(k) as f64 / (self.n as f64 * self.spacing())
    }

    /// Per-axis frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frequency(k)).collect()
    }

    /// Per-axis frequencies sorted ascending, `[-π/dx, π/dx)` for even `N`.
    pub fn frequencies_centered(&self) -> Vec<f64> {
        let mut f = self.frequencies();
        f.sort_by(f64::total_cmp);
        f
    }

    /// `|ξ|` at every FFT-ordered frequency pair.
    pub fn frequency_magnitudes(&self) -> ScalarField {
        let freq = self.frequencies();
        let values = Array2::from_shape_fn((self.n, self.n), |(a, b)| freq[a].hypot(freq[b]));
        ScalarField {
            grid: *self,
            values,
        }
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.n || cols != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                rows,
                cols,
            });
        }
        Ok(())
    }
}

/// Real-valued function sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.n, grid.n), c),
        }
    }

    pub fn from_array(grid: Grid, values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        grid.check_shape(r, c)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("field contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x₁, x₂)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| f(grid.node(i), grid.node(j)));
        Self { grid, values }
    }

    /// Builds a field from an index function `f(i, j)`.
    pub fn from_index_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| f(i, j));
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.n, grid.n));
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.mapv(f),
        }
    }

    /// `dx²`-weighted `L²` norm.
    pub fn norm(&self) -> f64 {
        (self.grid.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        same_grid(self.grid, other.grid)?;
        let s: f64 = Zip::from(&self.values)
            .and(&other.values)
            .fold(0.0, |acc, a, b| acc + a * b);
        Ok(self.grid.cell_area() * s)
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(self.grid, other.grid)?;
        Ok(Self::from_raw(self.grid, &self.values - &other.values))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_grid(self.grid, other.grid)?;
        Ok(Self::from_raw(self.grid, &self.values + &other.values))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Two-component field, used for gradients and the splitting variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            x: Array2::zeros((grid.n, grid.n)),
            y: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn from_arrays(grid: Grid, x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        let (r, c) = x.dim();
        grid.check_shape(r, c)?;
        let (r, c) = y.dim();
        grid.check_shape(r, c)?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(domain("vector field contains non-finite values"));
        }
        Ok(Self { grid, x, y })
    }

    pub(crate) fn from_raw(grid: Grid, x: Array2<f64>, y: Array2<f64>) -> Self {
        Self { grid, x, y }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Pointwise Euclidean length `|w|`.
    pub fn magnitude(&self) -> ScalarField {
        let values = Zip::from(&self.x).and(&self.y).map_collect(|a, b| a.hypot(*b));
        ScalarField::from_raw(self.grid, values)
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.x.iter().chain(self.y.iter()).map(|v| v * v).sum();
        (self.grid.cell_area() * s).sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        same_grid(self.grid, other.grid)?;
        let sx = Zip::from(&self.x).and(&other.x).fold(0.0, |acc, a, b| acc + a * b);
        let sy = Zip::from(&self.y).and(&other.y).fold(0.0, |acc, a, b| acc + a * b);
        Ok(self.grid.cell_area() * (sx + sy))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_grid(self.grid, other.grid)?;
        Ok(Self::from_raw(self.grid, &self.x + &other.x, &self.y + &other.y))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(self.grid, other.grid)?;
        Ok(Self::from_raw(self.grid, &self.x - &other.x, &self.y - &other.y))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// DFT coefficients in natural FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    grid: Grid,
    values: Array2<Complex64>,
}

impl SpectrumField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.n, grid.n), Complex64::new(0.0, 0.0)),
        }
    }

    pub fn from_array(grid: Grid, values: Array2<Complex64>) -> Result<Self> {
        let (r, c) = values.dim();
        grid.check_shape(r, c)?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Array2<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    /// `dx²`-weighted `L²` norm of the spatial field this spectrum represents.
    pub fn spatial_norm(&self) -> f64 {
        let n2 = (self.grid.n * self.grid.n) as f64;
        let s: f64 = self.values.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.cell_area() * s / n2).sqrt()
    }

    /// Relative size of the anti-Hermitian part, `‖F - F*(-ξ)‖ / (2‖F‖)`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..n {
            for b in 0..n {
                let v = self.values[(a, b)];
                let mirror = self.values[((n - a) % n, (n - b) % n)].conj();
                num += (v - mirror).norm_sqr();
                den += v.norm_sqr();
            }
        }
        if den == 0.0 {
            0.0
        } else {
            0.5 * (num / den).sqrt()
        }
    }
}

fn same_grid(a: Grid, b: Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

// Plans are immutable once built and shared between threads.
fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn fft2_in_place(data: &mut Array2<Complex64>, inverse: bool) {
    let n = data.nrows();
    let p = plans(n);
    let plan = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    {
        let buf = data.as_slice_mut().expect("standard layout");
        plan.process_with_scratch(buf, &mut scratch);
    }
    let mut t = data.t().as_standard_layout().into_owned();
    {
        let buf = t.as_slice_mut().expect("standard layout");
        plan.process_with_scratch(buf, &mut scratch);
    }
    data.assign(&t.t());
}

fn transform_real(grid: Grid, values: &Array2<f64>) -> SpectrumField {
    let mut data = values.mapv(|v| Complex64::new(v, 0.0));
    fft2_in_place(&mut data, false);
    SpectrumField::from_raw(grid, data)
}

/// Forward DFT of a real field.
pub fn transform(f: &ScalarField) -> SpectrumField {
    transform_real(f.grid, &f.values)
}

/// Forward DFTs of both components of a vector field.
pub fn transform_vector(w: &VectorField) -> (SpectrumField, SpectrumField) {
    (transform_real(w.grid, &w.x), transform_real(w.grid, &w.y))
}

/// Inverse DFT back to a real field.
///
/// The spectrum is projected onto its Hermitian part before inversion; a
/// defect above [`SYMMETRY_TOLERANCE`] signals a pipeline bug and is reported
/// as [`Error::SymmetryViolation`].
pub fn inverse_transform(spec: &SpectrumField) -> Result<ScalarField> {
    let defect = spec.hermitian_defect();
    if defect > SYMMETRY_TOLERANCE {
        return Err(Error::SymmetryViolation { residue: defect });
    }
    let n = spec.grid.n;
    let src = &spec.values;
    let mut data = Array2::from_shape_fn((n, n), |(a, b)| {
        0.5 * (src[(a, b)] + src[((n - a) % n, (n - b) % n)].conj())
    });
    fft2_in_place(&mut data, true);
    let scale = 1.0 / (n * n) as f64;
    Ok(ScalarField::from_raw(spec.grid, data.mapv(|c| c.re * scale)))
}

/// Forward differences with the last row/column set to zero:
/// `(∇f)¹_{i,j} = (f_{i+1,j} - f_{i,j})/dx` for `i < N-1`, `0` at `i = N-1`.
pub fn gradient(u: &ScalarField) -> VectorField {
    let n = u.grid.n;
    let dx = u.grid.spacing();
    let f = &u.values;
    let x = Array2::from_shape_fn((n, n), |(i, j)| if i + 1 < n { (f[(i + 1, j)] - f[(i, j)]) / dx } else { 0.0 });
    let y = Array2::from_shape_fn((n, n), |(i, j)| if j + 1 < n { (f[(i, j + 1)] - f[(i, j)]) / dx } else { 0.0 });
    VectorField::from_raw(u.grid, x, y)
}

/// Negative adjoint of [`gradient`]: `⟨∇u, w⟩ = -⟨u, ∇·w⟩`.
pub fn divergence(w: &VectorField) -> ScalarField {
    let n = w.grid.n;
    let inv = 1.0 / w.grid.spacing();
    let back = |p: &Array2<f64>, i: usize, j: usize, along_first: bool| -> f64 {
        let (k, here, prev) = if along_first {
            (i, p[(i, j)], if i > 0 { p[(i - 1, j)] } else { 0.0 })
        } else {
            (j, p[(i, j)], if j > 0 { p[(i, j - 1)] } else { 0.0 })
        };
        if k + 1 == n {
            -prev
        } else {
            here - prev
        }
    };
    let values = Array2::from_shape_fn((n, n), |(i, j)| (back(&w.x, i, j, true) + back(&w.y, i, j, false)) * inv);
    ScalarField::from_raw(w.grid, values)
}

/// Periodic forward differences, the convention diagonalized by
/// [`difference_symbols`].
pub fn periodic_gradient(u: &ScalarField) -> VectorField {
    let n = u.grid.n;
    let inv = 1.0 / u.grid.spacing();
    let f = &u.values;
    let x = Array2::from_shape_fn((n, n), |(i, j)| (f[((i + 1) % n, j)] - f[(i, j)]) * inv);
    let y = Array2::from_shape_fn((n, n), |(i, j)| (f[(i, (j + 1) % n)] - f[(i, j)]) * inv);
    VectorField::from_raw(u.grid, x, y)
}

/// Negative adjoint of [`periodic_gradient`].
pub fn periodic_divergence(w: &VectorField) -> ScalarField {
    let n = w.grid.n;
    let inv = 1.0 / w.grid.spacing();
    let values = Array2::from_shape_fn((n, n), |(i, j)| {
        let dx = w.x[(i, j)] - w.x[((i + n - 1) % n, j)];
        let dy = w.y[(i, j)] - w.y[(i, (j + n - 1) % n)];
        (dx + dy) * inv
    });
    ScalarField::from_raw(w.grid, values)
}

/// Symbols `d_k(ξ) = (e^{iξ_k dx} - 1)/dx` of the periodic forward
/// differences along each axis, on the full FFT-ordered frequency grid.
pub fn difference_symbols(grid: Grid) -> (SpectrumField, SpectrumField) {
    let dx = grid.spacing();
    let axis: Vec<Complex64> = grid
        .frequencies()
        .iter()
        .map(|&xi| (Complex64::new(0.0, xi * dx).exp() - 1.0) / dx)
        .collect();
    let n = grid.n;
    let d1 = Array2::from_shape_fn((n, n), |(a, _)| axis[a]);
    let d2 = Array2::from_shape_fn((n, n), |(_, b)| axis[b]);
    (SpectrumField::from_raw(grid, d1), SpectrumField::from_raw(grid, d2))
}
