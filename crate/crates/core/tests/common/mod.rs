// Brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use fracback::grid::{Grid, ScalarField, VectorField};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: Grid, rng: &mut impl Rng) -> ScalarField {
    ScalarField::from_index_fn(grid, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector_field(grid: Grid, rng: &mut impl Rng) -> VectorField {
    let a = random_field(grid, rng).into_values();
    let b = random_field(grid, rng).into_values();
    VectorField::from_arrays(grid, a, b).unwrap()
}

pub fn flatten(f: &ScalarField) -> DVector<f64> {
    DVector::from_iterator(f.values().len(), f.values().iter().copied())
}

pub fn unflatten(grid: Grid, v: &DVector<f64>) -> ScalarField {
    let n = grid.n();
    ScalarField::from_index_fn(grid, |i, j| v[i * n + j])
}

/// Dense matrix of the Fourier multiplier with real even symbol `s_hat`,
/// assembled entry by entry from the DFT sum.
pub fn multiplier_matrix(s_hat: &ScalarField) -> DMatrix<f64> {
    let n = s_hat.grid().n();
    let nn = n * n;
    let s = s_hat.values();
    // kernel depends only on index differences
    let mut kernel = vec![0.0; nn];
    for di in 0..n {
        for dj in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let phase = 2.0 * PI * ((di * k + dj * l) % n) as f64 / n as f64;
                    acc += s[(k, l)] * phase.cos();
                }
            }
            kernel[di * n + dj] = acc / nn as f64;
        }
    }
    DMatrix::from_fn(nn, nn, |p, q| {
        let (i, j) = (p / n, p % n);
        let (a, b) = (q / n, q % n);
        kernel[((i + n - a) % n) * n + (j + n - b) % n]
    })
}

/// Periodic forward-difference matrices along the first and second axes.
pub fn periodic_difference_matrices(grid: Grid) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = grid.n();
    let dx = grid.spacing();
    let mut d1 = DMatrix::zeros(n * n, n * n);
    let mut d2 = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let p = i * n + j;
            d1[(p, p)] -= 1.0 / dx;
            d1[(p, ((i + 1) % n) * n + j)] += 1.0 / dx;
            d2[(p, p)] -= 1.0 / dx;
            d2[(p, i * n + (j + 1) % n)] += 1.0 / dx;
        }
    }
    (d1, d2)
}

pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > tol {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

pub fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
