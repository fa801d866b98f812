use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fracback::bregman::{ExponentMode, InversionResult, SolverConfig};
use fracback::exponent::{exponent_from_edges, exponent_pm, ExponentConfig};
use fracback::experiments::{
    alpha_sweep, alpha_sweep_csv, lambda_scaling_check, make_dataset, run_example1, run_example2, run_method,
    sweep_alphas, ExperimentConfig, ExperimentReport, InitialField, Method,
};
use fracback::forward::{add_noise, ForwardOperator, NoiseSpec};
use fracback::grid::ScalarField;
use fracback::io::{export_pgm, read_field, read_pgm, write_field};
use fracback::special::{mittag_leffler, MlParams, ModelParams};
use fracback::subproblems::SplitConfig;

/// Backward problem for time-space fractional diffusion.
#[derive(Parser)]
#[command(name = "fracback", version)]
struct Cli {
    /// Noise seed used wherever a command does not receive one explicitly.
    #[arg(long, global = true, env = "FRACBACK_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulates E_{α,1}(-x) as CSV rows `x,value`.
    MlEval {
        #[arg(long)]
        alpha: f64,
        /// One or more comma-separated arguments, all ≥ 0.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Applies the forward map to an initial state, optionally adding noise.
    Forward {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Relative noise level δ: g + δ·max(g)·Z.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Half-width L when reading a PGM input.
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
    },
    /// Reconstructs the initial state from final-time data.
    Invert {
        #[arg(long, default_value_t = Method::VarTv)]
        method: Method,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = fracback::experiments::DEFAULT_LAMBDA)]
        lambda: f64,
        /// Splitting weight λ̃.
        #[arg(long, default_value_t = fracback::experiments::DEFAULT_LAMBDA_TILDE)]
        lambda_tilde: f64,
        #[arg(long, default_value_t = 1.01)]
        tau: f64,
        /// Relative noise level of the data, as passed to `forward --noise`.
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 500)]
        m_max: usize,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-iteration CSV `m,residual,objective,wall_ms`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExponentKind::Edges)]
        exponent: ExponentKind,
        /// Writes the exponent map of the data.
        #[arg(long)]
        dump_exponent: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
    },
    /// Runs one of the reference experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Number of orders in the α sweep.
        #[arg(long, default_value_t = 20)]
        alphas: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct ModelArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    final_time: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.alpha, self.beta, self.final_time)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExponentKind {
    Edges,
    Pm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Example1,
    Example2,
    LambdaScaling,
    AlphaSweep,
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn load(path: &Path, half_width: f64) -> Result<ScalarField> {
    let f = if is_pgm(path) { read_pgm(path, half_width) } else { read_field(path) };
    f.with_context(|| format!("reading {}", path.display()))
}

fn save(field: &ScalarField, path: &Path) -> Result<()> {
    let r = if is_pgm(path) { export_pgm(field, path) } else { write_field(field, path) };
    r.with_context(|| format!("writing {}", path.display()))
}

fn ml_eval(alpha: f64, xs: &[f64], table: Option<&Path>) -> Result<()> {
    let params = MlParams::standard(alpha)?;
    let mut out = String::from("x,value\n");
    for &x in xs {
        out.push_str(&format!("{x},{:e}\n", mittag_leffler(params, x)?));
    }
    match table {
        Some(path) => fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn write_log(result: &InversionResult, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "m,residual,objective,wall_ms")?;
    for r in &result.records {
        writeln!(f, "{},{:e},{:e},{}", r.m, r.residual, r.objective, r.wall_ms)?;
    }
    Ok(())
}

fn invert(cmd: Command, seed: u64) -> Result<()> {
    let Command::Invert {
        method,
        model,
        lambda,
        lambda_tilde,
        tau,
        delta,
        m_max,
        data,
        output,
        log,
        exponent,
        dump_exponent,
        half_width,
    } = cmd
    else {
        unreachable!()
    };
    let g = load(&data, half_width)?;
    let grid = g.grid();
    // the stopping rule needs ‖g^δ - g‖; for i.i.d. noise of standard
    // deviation δ·max(g) that is δ·max(g)·|Ω|^{1/2}
    let noise_norm = delta * g.max() * grid.area().sqrt();
    let cfg = SolverConfig {
        model: model.params()?,
        split: SplitConfig {
            lambda,
            lambda_tilde,
            dt0: 0.1,
            s: 0.1,
            ell_max: 5,
            tol: 1e-6,
        },
        exponent: ExponentConfig::default(),
        exponent_mode: match exponent {
            ExponentKind::Edges => ExponentMode::Edges,
            ExponentKind::Pm => ExponentMode::PowerMap,
        },
        tau,
        delta: noise_norm,
        m_max,
        k_max: 2,
        seed,
    };
    cfg.validate()?;
    if let Some(path) = dump_exponent {
        let p = match exponent {
            ExponentKind::Edges => exponent_from_edges(&g, &cfg.exponent)?,
            ExponentKind::Pm => exponent_pm(&g, &cfg.exponent)?,
        };
        save(&p, &path)?;
    }
    let op = ForwardOperator::new(cfg.model, grid)?;
    let result = match method {
        Method::VarTv => fracback::bregman::modified_bregman_with(&g, &cfg, &op)?,
        Method::Tv => fracback::bregman::tv_solve_with(&g, &cfg, &op)?,
        Method::Tikhonov => fracback::bregman::tikhonov_bregman_with(&g, &cfg, &op)?,
    };
    save(&result.u_rec, &output)?;
    if let Some(path) = log {
        write_log(&result, &path)?;
    }
    eprintln!(
        "{method}: stopped at m = {} ({:?}), residual {:.4e}, threshold {:.4e}",
        result.m_stop,
        result.stopped_by,
        result.residuals().last().copied().unwrap_or(f64::NAN),
        result.threshold
    );
    Ok(())
}

fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("seed,method,rel_err,m_stop,stopped_by\n");
    for run in &report.runs {
        for m in &run.methods {
            out.push_str(&format!("{},{},{},{},{:?}\n", run.seed, m.method, m.rel_err, m.m_stop, m.stopped_by));
        }
    }
    out
}

// Images of the first seed: truth, data and each reconstruction.
fn write_images(cfg: &ExperimentConfig, initial: InitialField, out: &Path) -> Result<()> {
    let grid = cfg.grid()?;
    let truth = initial.build(grid)?;
    let op = ForwardOperator::new(cfg.model, grid)?;
    let data = make_dataset(&truth, &op, cfg.delta, cfg.base_seed)?;
    for (field, stem) in [(&truth, "truth"), (&data.noisy, "data")] {
        save(field, &out.join(format!("{stem}.pgm")))?;
        save(field, &out.join(format!("{stem}.pd")))?;
    }
    let solver = cfg.solver(&op, data.realized_delta);
    for m in Method::ALL {
        let (u, _) = run_method(m, &data, &solver, &op)?;
        save(&u, &out.join(format!("{m}.pgm")))?;
        save(&u, &out.join(format!("{m}.pd")))?;
    }
    Ok(())
}

fn experiment(cmd: Command, seed: u64) -> Result<()> {
    let Command::Experiment {
        name,
        runs,
        n,
        delta,
        lambda,
        alphas,
        out,
    } = cmd
    else {
        unreachable!()
    };
    let mut cfg = match name {
        ExperimentName::Example1 | ExperimentName::LambdaScaling => ExperimentConfig::example1(),
        ExperimentName::Example2 => ExperimentConfig::example2(),
        ExperimentName::AlphaSweep => ExperimentConfig::alpha_sweep(),
    };
    if matches!(name, ExperimentName::LambdaScaling | ExperimentName::AlphaSweep) {
        cfg.n = 128;
    }
    cfg.base_seed = seed;
    cfg.runs = runs.unwrap_or(cfg.runs);
    cfg.n = n.unwrap_or(cfg.n);
    cfg.delta = delta.unwrap_or(cfg.delta);
    cfg.lambda = lambda.unwrap_or(cfg.lambda);
    fs::create_dir_all(&out)?;

    match name {
        ExperimentName::Example1 | ExperimentName::Example2 => {
            let (report, initial) = if matches!(name, ExperimentName::Example1) {
                (run_example1(&cfg)?, InitialField::Gaussian)
            } else {
                (run_example2(&cfg)?, InitialField::SheppLogan)
            };
            report.write_json(out.join(format!("{}.json", report.name)))?;
            fs::write(out.join(format!("{}.csv", report.name)), report_csv(&report))?;
            write_images(&cfg, initial, &out)?;
            for (m, e) in &report.rel_err_by_method {
                println!("{m}: {e:.4}%");
            }
            println!("median M (vartv): {}", report.m_stop);
        }
        ExperimentName::LambdaScaling => {
            let report = lambda_scaling_check(&cfg)?;
            fs::write(out.join("lambda_scaling.json"), serde_json::to_string_pretty(&report)?)?;
            let mut csv = String::from("lambda,m_stop,product\n");
            for r in &report.rows {
                csv.push_str(&format!("{},{},{}\n", r.lambda, r.m_stop, r.product));
                println!("lambda {:>10}: M = {:>4}, lambda*M = {}", r.lambda, r.m_stop, r.product);
            }
            fs::write(out.join("lambda_scaling.csv"), csv)?;
            println!("max/min - 1 = {:.3}", report.pairwise_spread());
        }
        ExperimentName::AlphaSweep => {
            if alphas < 2 {
                bail!("the sweep needs at least two orders");
            }
            let points = alpha_sweep(&cfg, &sweep_alphas(alphas))?;
            fs::write(out.join("alpha_sweep.csv"), alpha_sweep_csv(&points))?;
            let json = serde_json::json!({ "params": cfg, "points": points });
            fs::write(out.join("alpha_sweep.json"), serde_json::to_string_pretty(&json)?)?;
            print!("{}", alpha_sweep_csv(&points));
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::MlEval { alpha, x, table } => ml_eval(alpha, &x, table.as_deref()),
        Command::Forward {
            model,
            input,
            output,
            noise,
            half_width,
        } => {
            let u = load(&input, half_width)?;
            let g = ForwardOperator::new(model.params()?, u.grid())?.apply(&u)?;
            let noisy = add_noise(&g, NoiseSpec { delta: noise, seed: cli.seed })?;
            save(&noisy, &output)?;
            eprintln!("noise norm {:.6e}", noisy.sub(&g)?.norm());
            Ok(())
        }
        cmd @ Command::Invert { .. } => invert(cmd, cli.seed),
        cmd @ Command::Experiment { .. } => experiment(cmd, cli.seed),
    }
}
