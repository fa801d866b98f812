//! Mittag-Leffler evaluation on the negative real axis and the spectral
//! symbol of the time-space fractional diffusion semigroup.
//!
//! `E_{α,1}(-x)` is evaluated in three regimes:
//!
//! * a Taylor series `Σ (-x)^k / Γ(αk + 1)` while `x^{1/α}` is small enough
//!   that the alternating terms do not cancel catastrophically,
//! * the real-axis integral representation
//!   `E_α(-x) = sin(απ)/(απx) ∫_0^∞ exp(-v^{1/α}) / ((v/x)² + 2(v/x)cos(απ) + 1) dv`
//!   integrated by adaptive Gauss-Kronrod in the intermediate range,
//! * the asymptotic series `Σ_{k≥1} (-1)^{k+1} x^{-k} / Γ(1 - αk)` truncated
//!   at its smallest term for large `x`.
//!
//! For `α = 1` the function is `exp(-x)` and is returned directly.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{domain, Result};
use crate::grid::ScalarField;
use crate::quadrature;

/// Taylor series is used while `x^{1/α}` stays below this bound.
pub const SERIES_EXPONENT_LIMIT: f64 = 5.0;
/// Lower end of the asymptotic regime.
pub const ASYMPTOTIC_START: f64 = 50.0;

const SERIES_REL_STOP: f64 = 1e-18;
const MAX_SERIES_TERMS: usize = 600;

/// Parameters `(α, γ)` of `E_{α,γ}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl MlParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, gamma };
        p.validate()?;
        Ok(p)
    }

    /// `E_{α,1}`, the only family used by the forward operator.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(domain(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(domain(format!("gamma = {} must be positive", self.gamma)));
        }
        Ok(())
    }
}

/// Orders and final time of `∂_t^α v + (-Δ)^β v = 0` observed at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub final_time: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, final_time: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            final_time,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(domain(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            return Err(domain(format!("beta = {} must lie in (1/2, 1]", self.beta)));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(domain(format!(
                "final time T = {} must be positive and finite",
                self.final_time
            )));
        }
        Ok(())
    }

    /// Symbol value `E_{α,1}(-|ξ|^β T^α)` at one frequency magnitude.
    pub fn symbol(&self, xi_magnitude: f64) -> Result<f64> {
        if !(xi_magnitude >= 0.0) {
            return Err(domain(format!("|xi| = {xi_magnitude} must be nonnegative")));
        }
        let arg = xi_magnitude.powf(self.beta) * self.final_time.powf(self.alpha);
        mittag_leffler(MlParams::standard(self.alpha)?, arg)
    }
}

/// Evaluates `E_{α,γ}(-x)` for `x ≥ 0`.
///
/// With `γ = 1` every `x ≥ 0` is supported; other `γ` are only available on
/// the series range `x^{1/α} ≤ SERIES_EXPONENT_LIMIT`.
pub fn mittag_leffler(params: MlParams, x: f64) -> Result<f64> {
    params.validate()?;
    if !(x >= 0.0) || x.is_infinite() {
        return Err(domain(format!("x = {x} must be finite and nonnegative")));
    }
    let alpha = params.alpha;
    let in_series_range = x == 0.0 || x.powf(1.0 / alpha) <= SERIES_EXPONENT_LIMIT;
    if params.gamma != 1.0 {
        if in_series_range {
            return Ok(taylor(alpha, params.gamma, x));
        }
        return Err(domain(format!(
            "E_(alpha,gamma) with gamma = {} only supported for x^(1/alpha) <= {}",
            params.gamma, SERIES_EXPONENT_LIMIT
        )));
    }
    if alpha == 1.0 {
        return Ok((-x).exp());
    }
    let value = if in_series_range {
        taylor(alpha, 1.0, x)
    } else if x >= ASYMPTOTIC_START {
        asymptotic(alpha, x)
    } else {
        integral(alpha, x)
    };
    Ok(value)
}

/// `1/Γ(z)`, exactly zero at the poles `z = 0, -1, -2, ...`.
pub fn recip_gamma(z: f64) -> f64 {
    if z == z.round() && z <= 0.0 {
        0.0
    } else if z == z.round() && z <= 20.0 {
        // exact for small integers, where Γ(z) = (z-1)!
        1.0 / (1..z as u64).map(|k| k as f64).product::<f64>()
    } else {
        1.0 / gamma(z)
    }
}

// Neumaier-compensated partial sum of the Taylor series.
fn taylor(alpha: f64, gamma_param: f64, x: f64) -> f64 {
    let mut sum = recip_gamma(gamma_param);
    if x == 0.0 {
        return sum;
    }
    let mut comp = 0.0;
    let ln_x = x.ln();
    let mut prev = f64::INFINITY;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        let arg = alpha * kf + gamma_param;
        let magnitude = (kf * ln_x - ln_gamma(arg)).exp();
        let term = if k % 2 == 0 { magnitude } else { -magnitude };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if magnitude < prev && magnitude <= SERIES_REL_STOP * (sum + comp).abs() {
            break;
        }
        prev = magnitude;
    }
    sum + comp
}

// 1/Γ(1 - αk) = sin(παk) Γ(αk) / π by reflection; the k-th term is
// (-1)^{k+1} sin(παk) Γ(αk) / (π x^k).
fn asymptotic(alpha: f64, x: f64) -> f64 {
    let ln_x = x.ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let ak = alpha * k as f64;
        let magnitude = (ln_gamma(ak) - k as f64 * ln_x).exp() / PI;
        if magnitude > prev {
            break;
        }
        prev = magnitude;
        if (ak - ak.round()).abs() < 1e-12 {
            // Γ(1 - αk) has a pole, the term vanishes
            continue;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * (PI * ak).sin() * magnitude;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if magnitude < SERIES_REL_STOP * (sum + comp).abs() {
            break;
        }
    }
    sum + comp
}

fn integral(alpha: f64, x: f64) -> f64 {
    let inv_alpha = 1.0 / alpha;
    let (sin_a, cos_a) = (alpha * PI).sin_cos();
    // exp(-v^{1/α}) < 1e-20 beyond this point
    let cutoff = 46.0f64.powf(alpha);
    let integrand = |v: f64| {
        let r = v / x;
        (-v.powf(inv_alpha)).exp() / (r * r + 2.0 * r * cos_a + 1.0)
    };
    let mut breaks = vec![0.0, 0.25 * cutoff, 0.5 * cutoff, cutoff];
    if cos_a < 0.0 {
        // near-pole of the Cauchy-like kernel at v = -x cos(απ), width ~ x sin(απ)
        let peak = -x * cos_a;
        let width = x * sin_a;
        for scale in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
            let b = peak + scale * width;
            if b > 0.0 && b < cutoff {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let prefactor = sin_a / (alpha * PI * x);
    let (value, _) = quadrature::integrate(integrand, &breaks, 1e-14 / prefactor.max(1e-300), 2000);
    prefactor * value
}

/// Pointwise `Ŝ(ξ) = E_{α,1}(-|ξ|^β T^α)` over a field of frequency magnitudes.
///
/// Distinct magnitudes are evaluated once; on a square grid only a few
/// thousand of them occur.
pub fn spectral_multiplier(model: ModelParams, xi_magnitudes: &ScalarField) -> Result<ScalarField> {
    model.validate()?;
    let mut distinct: Vec<u64> = xi_magnitudes.values().iter().map(|v| v.to_bits()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let evaluated: Vec<(u64, f64)> = distinct
        .par_iter()
        .map(|&bits| model.symbol(f64::from_bits(bits)).map(|s| (bits, s)))
        .collect::<Result<_>>()?;
    let table: HashMap<u64, f64> = evaluated.into_iter().collect();
    Ok(xi_magnitudes.map(|v| table[&v.to_bits()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ml(alpha: f64, x: f64) -> f64 {
        mittag_leffler(MlParams::standard(alpha).unwrap(), x).unwrap()
    }

    #[test]
    fn exponential_case() {
        assert_abs_diff_eq!(ml(1.0, 1.0), 0.367_879_441_171_442_3, epsilon = 1e-15);
        for i in 0..=500 {
            let x = i as f64 * 0.1;
            assert_abs_diff_eq!(ml(1.0, x), (-x).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn value_at_zero_is_one() {
        for alpha in [0.1, 0.5, 0.6, 0.99, 1.0] {
            assert_eq!(ml(alpha, 0.0), 1.0);
        }
    }

    #[test]
    fn half_order_matches_erfc_closed_form() {
        // E_{1/2}(-x) = exp(x^2) erfc(x), evaluated at 30 digits
        let table = [
            (0.1, 0.896_456_979_969_126_6),
            (0.5, 0.615_690_344_192_925_9),
            (1.0, 0.427_583_576_155_807),
            (1.5, 0.321_585_416_454_317_5),
            (2.0, 0.255_395_676_310_505_7),
            (3.0, 0.179_001_151_181_389_95),
            (4.0, 0.136_999_457_625_061_4),
        ];
        for (x, expect) in table {
            assert_abs_diff_eq!(ml(0.5, x), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn regimes_agree_at_crossovers() {
        for alpha in [0.3, 0.5, 0.6, 0.75, 0.9, 0.99] {
            let xc = SERIES_EXPONENT_LIMIT.powf(alpha);
            assert_abs_diff_eq!(taylor(alpha, 1.0, xc), integral(alpha, xc), epsilon = 1e-12);
            let xa = ASYMPTOTIC_START;
            assert_abs_diff_eq!(asymptotic(alpha, xa), integral(alpha, xa), epsilon = 1e-12);
        }
    }

    #[test]
    fn bounded_and_non_increasing() {
        for alpha in [0.5, 0.6, 0.9, 0.99] {
            let mut prev = 1.0;
            for i in 0..1000 {
                let x = 10f64.powf(-6.0 + 10.0 * i as f64 / 999.0);
                let v = ml(alpha, x);
                assert!(v > 0.0 && v <= 1.0, "alpha={alpha} x={x} v={v}");
                assert!(v <= prev + 1e-13, "alpha={alpha} x={x}");
                prev = v;
            }
        }
    }

    #[test]
    fn leading_asymptote() {
        let x = 1e4;
        let lead = 1.0 / (x * gamma(0.4));
        let v = ml(0.6, x);
        assert!(((v - lead) / v).abs() <= 0.05);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(mittag_leffler(MlParams { alpha: 1.2, gamma: 1.0 }, 1.0).is_err());
        assert!(mittag_leffler(MlParams { alpha: 0.0, gamma: 1.0 }, 1.0).is_err());
        assert!(mittag_leffler(MlParams::standard(0.5).unwrap(), -1.0).is_err());
        assert!(mittag_leffler(MlParams::standard(0.5).unwrap(), f64::NAN).is_err());
        assert!(ModelParams::new(0.6, 0.4, 1.0).is_err());
        assert!(ModelParams::new(0.6, 0.9, 0.0).is_err());
    }

    #[test]
    fn general_gamma_on_series_range() {
        // E_{1,2}(-x) = (1 - e^{-x}) / x
        let p = MlParams::new(1.0, 2.0).unwrap();
        let x = 0.7;
        assert_abs_diff_eq!(mittag_leffler(p, x).unwrap(), (1.0 - (-x).exp()) / x, epsilon = 1e-14);
        assert!(mittag_leffler(p, 100.0).is_err());
    }

    #[test]
    fn reciprocal_gamma_poles() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-3.0), 0.0);
        assert_abs_diff_eq!(recip_gamma(1.0), 1.0, epsilon = 1e-15);
    }
}
