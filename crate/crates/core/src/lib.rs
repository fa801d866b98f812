//! Backward problem for the time-space fractional diffusion equation
//! `∂_t^α v + (-Δ)^β v = 0` on `[-L, L]²`: recover the initial state `u`
//! from a noisy observation of `v(T, ·)`.
//!
//! The forward map is the Fourier multiplier `Ŝ(ξ) = E_{α,1}(-|ξ|^β T^α)`.
//! Inversion minimizes `∫|∇u|^{p̃(x)} dx + (λ/2)‖Ŝû - ĝ^δ‖²` with a
//! Bregman iteration whose exponent map `p̃ ∈ [1, 2]` is rebuilt from the
//! current iterate, stopped by the discrepancy principle.
//!
//! ```
//! use fracback::{forward, grid::Grid, special::ModelParams};
//!
//! let grid = Grid::new(32, 10.0)?;
//! let model = ModelParams::new(0.6, 1.0, 1.0)?;
//! let u = forward::gaussian_initial(grid);
//! let g = forward::apply_forward(&u, model)?;
//! assert!(g.norm() <= u.norm());
//! # Ok::<(), fracback::Error>(())
//! ```

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod error;
pub mod experiments;
pub mod exponent;
pub mod forward;
pub mod grid;
pub mod io;
mod quadrature;
pub mod special;
pub mod subproblems;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/forward-model.md")]
    struct ForwardModel;
    #[doc = include_str!("../../../book/src/grids.md")]
    struct Grids;
    #[doc = include_str!("../../../book/src/exponent-map.md")]
    struct ExponentMap;
    #[doc = include_str!("../../../book/src/subproblems.md")]
    struct Subproblems;
    #[doc = include_str!("../../../book/src/bregman.md")]
    struct Bregman;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../README.md")]
    struct Readme;
}
