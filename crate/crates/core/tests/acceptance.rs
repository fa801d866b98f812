//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//! The reconstruction criteria run the full-size experiments and take
//! several minutes on one core.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use fracback::bregman::{modified_bregman_with, StopReason};
use fracback::experiments::{
    alpha_sweep, lambda_scaling_check, make_dataset, run_example1, run_example2, sweep_alphas, ExperimentConfig,
    Method, SWEEP_LAST_FRACTIONAL,
};
use fracback::exponent::{exponent_from_edges, exponent_pm, partition_domain, pm_polynomial, ExponentConfig};
use fracback::forward::{gaussian_initial, shepp_logan_phantom, ForwardOperator};
use fracback::grid::{
    divergence, gradient, inverse_transform, periodic_divergence, periodic_gradient, transform, Grid, ScalarField,
};
use fracback::special::{mittag_leffler, MlParams, ModelParams};
use fracback::subproblems::{solve_u, solve_w1, solve_w2, solve_w3, SplitConfig};
use nalgebra::DVector;
use ndarray::Array2;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    let ok = elapsed <= Duration::from_secs(limit_s);
    (ok, format!("{:.1}s of {limit_s}s", elapsed.as_secs_f64()))
}

fn mittag_leffler_accuracy() -> Outcome {
    let text = include_str!("data/ml_oracle.csv");
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.trim().parse().unwrap()).collect();
        let got = mittag_leffler(MlParams::standard(v[0]).unwrap(), v[1]).unwrap();
        worst = worst.max((got - v[2]).abs());
        count += 1;
    }
    outcome(worst <= 1e-10, format!("max |impl - oracle| = {worst:.2e} over {count} points"))
}

fn transform_properties() -> Outcome {
    let mut r = rng(1);
    let mut worst = [0.0f64; 3];
    for n in [8, 64, 256] {
        let grid = Grid::new(n, 10.0).unwrap();
        for _ in 0..100 {
            let f = random_field(grid, &mut r);
            let spec = transform(&f);
            worst[0] = worst[0].max((spec.spatial_norm() - f.norm()).abs() / f.norm());
            let back = inverse_transform(&spec).unwrap();
            worst[1] = worst[1].max(back.sub(&f).unwrap().norm() / f.norm());
            let w = random_vector_field(grid, &mut r);
            for (gu, dw) in [
                (gradient(&f), divergence(&w)),
                (periodic_gradient(&f), periodic_divergence(&w)),
            ] {
                let lhs = gu.inner(&w).unwrap();
                let rhs = -f.inner(&dw).unwrap();
                worst[2] = worst[2].max((lhs - rhs).abs() / (gu.norm() * w.norm()));
            }
        }
    }
    outcome(
        worst.iter().all(|&e| e <= 1e-12),
        format!("Parseval {:.1e}, round trip {:.1e}, adjointness {:.1e}", worst[0], worst[1], worst[2]),
    )
}

fn subproblem_oracles() -> Outcome {
    let grid = Grid::new(8, 1.5).unwrap();
    let op = ForwardOperator::new(ModelParams::new(0.6, 1.0, 1.0).unwrap(), grid).unwrap();
    let s = multiplier_matrix(op.symbol());
    let (d1, d2) = periodic_difference_matrices(grid);
    let mut r = rng(3);
    let mut u_err: f64 = 0.0;
    for &(lambda, lt) in &[(1.0, 1.0), (200.0, 3.0), (0.05, 20.0)] {
        let cfg = SplitConfig {
            lambda,
            lambda_tilde: lt,
            dt0: 0.1,
            s: 0.1,
            ell_max: 5,
            tol: 1e-6,
        };
        let g = random_field(grid, &mut r);
        let w = random_vector_field(grid, &mut r);
        let u = solve_u(&w, &transform(&g), op.symbol(), &cfg, grid).unwrap();
        let wx = flatten(&ScalarField::from_array(grid, w.x.clone()).unwrap());
        let wy = flatten(&ScalarField::from_array(grid, w.y.clone()).unwrap());
        let lhs = &s.transpose() * &s * lambda + (d1.transpose() * &d1 + d2.transpose() * &d2) * lt;
        let rhs: DVector<f64> = &s.transpose() * flatten(&g) * lambda + (d1.transpose() * wx + d2.transpose() * wy) * lt;
        u_err = u_err.max(max_abs_diff(&u, &unflatten(grid, &lhs.lu().solve(&rhs).unwrap())));
    }

    let big = Grid::new(32, 10.0).unwrap();
    let a = random_vector_field(big, &mut r).scale_for_test(3.0);
    let mask = Array2::from_elem((32, 32), true);
    let mut pixel_err: f64 = 0.0;
    for lt in [0.5, 3.0, 40.0] {
        let w1 = solve_w1(&a, &mask, lt);
        let w3 = solve_w3(&a, &mask, lt);
        for (i, j) in (0..32).flat_map(|i| (0..32).map(move |j| (i, j))) {
            let (x, y) = (a.x[(i, j)], a.y[(i, j)]);
            let mag = x.hypot(y);
            let f1 = if mag > 1.0 / lt { (mag - 1.0 / lt) / mag } else { 0.0 };
            let f3 = lt / (lt + 2.0);
            pixel_err = pixel_err
                .max((w1.x[(i, j)] - f1 * x).abs())
                .max((w1.y[(i, j)] - f1 * y).abs())
                .max((w3.x[(i, j)] - f3 * x).abs())
                .max((w3.y[(i, j)] - f3 * y).abs());
        }
    }

    let long = |lt: f64| SplitConfig {
        lambda: 1.0,
        lambda_tilde: lt,
        dt0: 0.1,
        s: 0.1,
        ell_max: 2000,
        tol: 1e-12,
    };
    let small = Grid::new(8, 1.0).unwrap();
    let a8 = random_vector_field(small, &mut r);
    let full = Array2::from_elem((8, 8), true);
    let quad = solve_w2(&a8, &ScalarField::constant(small, 2.0), &full, &long(3.0)).unwrap();
    let quad_err = quad.w.sub(&solve_w3(&a8, &full, 3.0)).unwrap().norm();

    let pix = Grid::new(2, 1.0).unwrap();
    let mut target = fracback::grid::VectorField::zeros(pix);
    target.x[(0, 0)] = 1.0;
    let mut one = Array2::from_elem((2, 2), false);
    one[(0, 0)] = true;
    let w2 = solve_w2(&target, &ScalarField::constant(pix, 1.5), &one, &long(10.0)).unwrap();
    let t = golden_section(|t: f64| t.abs().powf(1.5) + 5.0 * (t - 1.0).powi(2), 0.0, 1.0, 1e-12);
    let gs_err = (w2.w.x[(0, 0)] - t).abs().max(w2.w.y[(0, 0)].abs());

    outcome(
        u_err <= 1e-8 && pixel_err <= 1e-14 && quad_err <= 1e-6 && gs_err <= 1e-4,
        format!(
            "u dense {u_err:.1e}, w1/w3 pixel {pixel_err:.1e}, w2 p=2 {quad_err:.1e}, w2 golden section {gs_err:.1e}"
        ),
    )
}

trait ScaleForTest {
    fn scale_for_test(self, c: f64) -> Self;
}

impl ScaleForTest for fracback::grid::VectorField {
    fn scale_for_test(mut self, c: f64) -> Self {
        self.x.mapv_inplace(|v| v * c);
        self.y.mapv_inplace(|v| v * c);
        self
    }
}

fn monotonicity() -> Outcome {
    let cfg = ExperimentConfig {
        n: 128,
        ..ExperimentConfig::example1()
    };
    let grid = cfg.grid().unwrap();
    let op = ForwardOperator::new(cfg.model, grid).unwrap();
    let data = make_dataset(&gaussian_initial(grid), &op, cfg.delta, cfg.base_seed).unwrap();
    let out = modified_bregman_with(&data.noisy, &cfg.solver(&op, data.realized_delta), &op).unwrap();
    let res = out.residuals();
    let slack = 1e-8 * res[0];
    let worst = res.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
    outcome(
        worst <= slack && out.stopped_by == StopReason::Discrepancy,
        format!(
            "M = {}, largest step change {:.2e} (slack {:.1e}), residual {:.3e} -> {:.3e}",
            out.m_stop,
            worst,
            slack,
            res[0],
            res[res.len() - 1]
        ),
    )
}

fn lambda_scaling() -> Outcome {
    let cfg = ExperimentConfig {
        n: 128,
        ..ExperimentConfig::example1()
    };
    let rep = lambda_scaling_check(&cfg).unwrap();
    let all_stopped = rep.rows.iter().all(|r| r.stopped_by == StopReason::Discrepancy);
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("λ={} M={} λM={}", r.lambda, r.m_stop, r.product))
        .collect();
    outcome(
        all_stopped && rep.pairwise_spread() <= 0.3,
        format!("{}; max/min - 1 = {:.3}", rows.join(", "), rep.pairwise_spread()),
    )
}

fn table1() -> Outcome {
    let rep = run_example1(&ExperimentConfig::example1()).unwrap();
    let e = &rep.rel_err_by_method;
    let (v, tv, tk) = (e[&Method::VarTv], e[&Method::Tv], e[&Method::Tikhonov]);
    outcome(
        v <= 1.0 && tk <= 1.0 && tv >= 2.0 * v,
        format!("vartv {v:.4}%, tikhonov {tk:.4}%, tv {tv:.4}% over {} seeds", rep.seeds.len()),
    )
}

fn table2() -> Outcome {
    let rep = run_example2(&ExperimentConfig::example2()).unwrap();
    let e = &rep.rel_err_by_method;
    let (v, tv, tk) = (e[&Method::VarTv], e[&Method::Tv], e[&Method::Tikhonov]);
    outcome(
        (v - tv).abs() <= 0.2 * tv && tk > tv,
        format!("vartv {v:.4}%, tv {tv:.4}%, tikhonov {tk:.4}% over {} seeds", rep.seeds.len()),
    )
}

fn alpha_discontinuity() -> Outcome {
    let cfg = ExperimentConfig {
        n: 128,
        ..ExperimentConfig::alpha_sweep()
    };
    let points = alpha_sweep(&cfg, &sweep_alphas(20)).unwrap();
    let at = |a: f64| points.iter().find(|p| p.alpha == a).unwrap().rel_err;
    let (near, one) = (at(SWEEP_LAST_FRACTIONAL), at(1.0));
    let sorted = points.windows(2).all(|w| w[0].alpha < w[1].alpha);
    outcome(
        points.len() == 20 && sorted && one >= 1.3 * near,
        format!(
            "RelErr(0.99) = {near:.3}%, RelErr(1) = {one:.3}%, ratio {:.3}; RelErr(0.5) = {:.3}%",
            one / near,
            points[0].rel_err
        ),
    )
}

fn exponent_properties() -> Outcome {
    let mut r = rng(9);
    let cfg = ExponentConfig::default();
    let mut in_range = true;
    let mut partitions_ok = true;
    let grid = Grid::new(32, 10.0).unwrap();
    let mut fields: Vec<ScalarField> = (0..980)
        .map(|k| {
            let f = random_field(grid, &mut r);
            let scale = 10f64.powf(r.random_range(-3.0..3.0));
            if k % 2 == 0 {
                f.scale(scale)
            } else {
                fracback::exponent::gaussian_smooth(&f, 1.0).unwrap().scale(scale)
            }
        })
        .collect();
    fields.push(ScalarField::zeros(grid));
    fields.push(ScalarField::constant(grid, 4.0));
    fields.push(gaussian_initial(grid));
    fields.push(shepp_logan_phantom(grid).unwrap());
    for k in 0..16 {
        let c = k as f64 - 8.0;
        fields.push(ScalarField::from_fn(grid, move |x, y| if x + 0.3 * y > c { 1.0 } else { 0.0 }));
    }
    for f in &fields {
        for p in [exponent_from_edges(f, &cfg).unwrap(), exponent_pm(f, &cfg).unwrap()] {
            in_range &= p.min() >= 1.0 && p.max() <= 2.0;
            let part = partition_domain(&p, cfg.epsilon).unwrap();
            for ((a, b), c) in part.mask1.iter().zip(&part.mask2).zip(&part.mask3) {
                partitions_ok &= (*a as u8 + *b as u8 + *c as u8) == 1;
            }
        }
    }
    let ends = pm_polynomial(0.0, 0.7) == 2.0 && pm_polynomial(0.7, 0.7) == 1.0 && pm_polynomial(1.0, 1.0) == 1.0;
    outcome(
        in_range && partitions_ok && ends,
        format!(
            "{} fields: range {in_range}, partition {partitions_ok}, P_M endpoints {ends}",
            fields.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Mittag-Leffler accuracy", mittag_leffler_accuracy, 30),
        ("transform and calculus identities", transform_properties, 30),
        ("subproblem oracles", subproblem_oracles, 60),
        ("residual monotonicity", monotonicity, 300),
        ("lambda-M scaling", lambda_scaling, 1200),
        ("Table 1 reproduction", table1, 3600),
        ("Table 2 reproduction", table2, 3600),
        ("alpha-sweep discontinuity", alpha_discontinuity, 1800),
        ("exponent map properties", exponent_properties, 10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let (fast, time) = within(started.elapsed(), *limit);
        let pass = result.pass && fast;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({}; {})",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            time
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
