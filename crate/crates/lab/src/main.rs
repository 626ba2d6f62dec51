//! Command-line front end: rate curves, spectrum functionals, single KRR
//! runs, full sweeps, and verification reports.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 config
//! errors (the message names the offending field or flag).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use krrlab::experiments::{fit_loglog_slope, run_sweep, verify_theory, worker_count};
use krrlab::formats::{
    fmt_float, functional_csv, rate_curve_csv, FormatError, FunctionalRow, KernelSpec,
    ModelExport, SweepConfig, SweepResult, TargetSpecJson,
};
use krrlab_core::krr::{bias_variance, fit, TrainingSet};
use krrlab_core::rates::{rate_curve, CurveSelection};
use krrlab_core::spectrum::{CoefficientSpec, SpectrumModel};

#[derive(Parser)]
#[command(
    name = "krrlab",
    version,
    about = "Large-dimensional product-kernel ridge regression laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum AxisArg {
    #[default]
    D,
    N,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum WhichArg {
    Exact,
    Minimax,
    #[default]
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the exact/minimax rate-exponent table over a gamma grid as CSV.
    Rates {
        /// Source condition s.
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 0.01)]
        gamma_min: f64,
        #[arg(long, default_value_t = 6.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Plot orientation hint; the CSV always carries both exponent axes.
        #[arg(long, value_enum, default_value_t)]
        axis: AxisArg,
        #[arg(long, value_enum, default_value_t)]
        which: WhichArg,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the spectral functionals of a kernel over a lambda grid.
    Spectrum {
        /// Path to a kernel spec JSON file.
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 12)]
        k_max: usize,
        /// Either `min:max:count` (log-spaced) or a comma-separated list.
        #[arg(long)]
        lambda_grid: String,
        /// Source exponent for the bias functional (unit level masses).
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Diagonal bound used in the sup-norm envelope.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One seeded fit: generalization error plus bias/variance, as JSON.
    Run {
        #[arg(long)]
        kernel: PathBuf,
        /// Path to a target spec JSON file.
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_eps: f64,
        #[arg(long, default_value_t = 2000)]
        test_m: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the fitted model (kernel spec + base64 arrays) here.
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep config and persist results/<hash>.json and .csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Overrides the config's root_seed (KRRLAB_SEED also applies).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a sweep's fitted slope with theory; exit 0 iff it passes.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            // Config problems exit 2; everything else exits 1.
            if e.downcast_ref::<FormatError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn dispatch(cli: Cli) -> Result<ExitCode, AnyError> {
    match cli.command {
        Command::Rates { s, gamma_min, gamma_max, step, axis: _, which, out } => {
            cmd_rates(s, gamma_min, gamma_max, step, which, out)
        }
        Command::Spectrum { kernel, k_max, lambda_grid, s, kappa, out } => {
            cmd_spectrum(&kernel, k_max, &lambda_grid, s, kappa, out)
        }
        Command::Run { kernel, target, n, lambda, sigma_eps, test_m, seed, model_out, out } => {
            cmd_run(&kernel, &target, n, lambda, sigma_eps, test_m, seed, model_out, out)
        }
        Command::Sweep { config, out_dir, seed } => cmd_sweep(&config, &out_dir, seed),
        Command::Verify { config, out_dir, seed } => cmd_verify(&config, &out_dir, seed),
    }
}

fn config_err(field: &str, message: impl Into<String>) -> AnyError {
    Box::new(FormatError::Field { field: field.into(), message: message.into() })
}

fn write_or_print(out: Option<PathBuf>, text: &str) -> Result<(), AnyError> {
    match out {
        Some(path) => {
            std::fs::write(&path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_rates(
    s: f64,
    gamma_min: f64,
    gamma_max: f64,
    step: f64,
    which: WhichArg,
    out: Option<PathBuf>,
) -> Result<ExitCode, AnyError> {
    if !(s > 0.0) {
        return Err(config_err("s", "must be positive"));
    }
    if !(gamma_min > 0.0) || !(gamma_max > gamma_min) || !(step > 0.0) {
        return Err(config_err(
            "gamma-min/gamma-max/step",
            "need 0 < gamma-min < gamma-max and step > 0",
        ));
    }
    let count = ((gamma_max - gamma_min) / step).round() as usize;
    let grid: Vec<f64> = (0..=count).map(|i| gamma_min + i as f64 * step).collect();
    let which = match which {
        WhichArg::Exact => CurveSelection::Exact,
        WhichArg::Minimax => CurveSelection::Minimax,
        WhichArg::Both => CurveSelection::Both,
    };
    let rows = rate_curve(s, &grid, which).map_err(|e| config_err("s/gamma", e.to_string()))?;
    write_or_print(out, &rate_curve_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_lambda_grid(text: &str) -> Result<Vec<f64>, AnyError> {
    let parse_one = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| config_err("lambda-grid", format!("cannot parse `{v}` as a number")))
    };
    let grid: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(config_err("lambda-grid", "expected min:max:count"));
        }
        let min = parse_one(parts[0])?;
        let max = parse_one(parts[1])?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| config_err("lambda-grid", "count must be an integer"))?;
        if count < 2 || !(min > 0.0) || !(max > min) {
            return Err(config_err("lambda-grid", "need 0 < min < max and count >= 2"));
        }
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                (min.ln() + t * (max.ln() - min.ln())).exp()
            })
            .collect()
    } else {
        text.split(',').map(parse_one).collect::<Result<_, _>>()?
    };
    if grid.iter().any(|&l| !(l > 0.0)) {
        return Err(config_err("lambda-grid", "lambda values must be positive"));
    }
    Ok(grid)
}

fn cmd_spectrum(
    kernel_path: &Path,
    k_max: usize,
    lambda_grid: &str,
    s: f64,
    kappa: f64,
    out: Option<PathBuf>,
) -> Result<ExitCode, AnyError> {
    if !(s > 0.0) {
        return Err(config_err("s", "must be positive"));
    }
    let spec: KernelSpec = serde_json::from_str(&std::fs::read_to_string(kernel_path)?)
        .map_err(FormatError::from)?;
    let kernel = spec.build()?;
    let grid = parse_lambda_grid(lambda_grid)?;
    let spectrum = SpectrumModel::build(&kernel, k_max).map_err(|e| e.to_string())?;
    let coeffs = CoefficientSpec::uniform(k_max + 1, 1.0, s).map_err(|e| e.to_string())?;

    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let n1 = spectrum.n1(lambda).map_err(|e| e.to_string())?;
        let n2 = spectrum.n2(lambda).map_err(|e| e.to_string())?;
        let r2 = spectrum.r2(&coeffs, lambda).map_err(|e| e.to_string())?;
        let flam =
            spectrum.f_lambda_sup_bound(&coeffs, lambda, kappa).map_err(|e| e.to_string())?;
        rows.push(FunctionalRow {
            lambda,
            n1: n1.value,
            n2: n2.value,
            r2,
            flam_bound: flam,
            tail_err: n1.tail_estimate.max(n2.tail_estimate),
        });
    }
    write_or_print(out, &functional_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct RunReport {
    n: usize,
    d: usize,
    lambda: f64,
    sigma_eps: f64,
    test_m: usize,
    seed: u64,
    jitter: f64,
    dual_residual: f64,
    error_mean: f64,
    error_std_error: f64,
    bias2: f64,
    bias2_std_error: f64,
    variance: f64,
    variance_std_error: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    kernel_path: &Path,
    target_path: &Path,
    n: usize,
    lambda: f64,
    sigma_eps: f64,
    test_m: usize,
    seed: Option<u64>,
    model_out: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<ExitCode, AnyError> {
    if !(lambda > 0.0) {
        return Err(config_err("lambda", "lambda must be positive"));
    }
    if n == 0 {
        return Err(config_err("n", "must be at least 1"));
    }
    if !(sigma_eps >= 0.0) {
        return Err(config_err("sigma-eps", "must be nonnegative"));
    }
    let spec: KernelSpec = serde_json::from_str(&std::fs::read_to_string(kernel_path)?)
        .map_err(FormatError::from)?;
    let kernel = spec.build()?;
    let target_json: TargetSpecJson =
        serde_json::from_str(&std::fs::read_to_string(target_path)?)
            .map_err(FormatError::from)?;

    let seed = resolve_seed(seed, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = target_json.build(&kernel, &mut rng)?;

    let rows: Vec<Vec<f64>> = (0..n).map(|_| kernel.sample_input(&mut rng)).collect();
    let noise = Normal::new(0.0, sigma_eps).map_err(|e| e.to_string())?;
    let y: Vec<f64> = rows
        .iter()
        .map(|row| {
            Ok::<_, AnyError>(
                target.evaluate(row).map_err(|e| e.to_string())? + noise.sample(&mut rng),
            )
        })
        .collect::<Result<_, _>>()?;

    let data = TrainingSet::from_rows(&rows, y).map_err(|e| e.to_string())?;
    let model = fit(&kernel, &data, lambda).map_err(|e| e.to_string())?;
    let error =
        model.generalization_error(&target, test_m, &mut rng).map_err(|e| e.to_string())?;
    let decomposition = bias_variance(&kernel, &rows, &target, sigma_eps, lambda, test_m, &mut rng)
        .map_err(|e| e.to_string())?;

    if let Some(path) = model_out {
        let export = ModelExport::from_model(&model, &rows);
        std::fs::write(path, serde_json::to_string_pretty(&export)? + "\n")?;
    }

    let report = RunReport {
        n,
        d: kernel.d(),
        lambda,
        sigma_eps,
        test_m,
        seed,
        jitter: model.jitter(),
        dual_residual: model.dual_residual(),
        error_mean: error.mean,
        error_std_error: error.std_error,
        bias2: decomposition.bias2,
        bias2_std_error: decomposition.bias2_std_error,
        variance: decomposition.variance,
        variance_std_error: decomposition.variance_std_error,
    };
    write_or_print(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

/// Seed precedence: --seed flag, then KRRLAB_SEED, then the fallback
/// (config root_seed, or 0 for the run subcommand).
fn resolve_seed(flag: Option<u64>, fallback: u64) -> u64 {
    flag.or_else(|| std::env::var("KRRLAB_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(fallback)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SweepConfig, AnyError> {
    let mut cfg = SweepConfig::from_json(&std::fs::read_to_string(path)?)?;
    cfg.root_seed = resolve_seed(seed, cfg.root_seed);
    Ok(cfg)
}

fn result_paths(out_dir: &Path, hash: &str) -> (PathBuf, PathBuf) {
    (out_dir.join(format!("{hash}.json")), out_dir.join(format!("{hash}.csv")))
}

fn persist_result(out_dir: &Path, result: &SweepResult) -> Result<PathBuf, AnyError> {
    std::fs::create_dir_all(out_dir)?;
    let (json_path, csv_path) = result_paths(out_dir, &result.config_hash);
    std::fs::write(&json_path, result.to_json())?;
    std::fs::write(&csv_path, result.to_csv())?;
    Ok(json_path)
}

fn cmd_sweep(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<ExitCode, AnyError> {
    let cfg = load_config(config, seed)?;
    if let Some(workers) = worker_count() {
        eprintln!("workers: {workers}");
    }
    let result = run_sweep(&cfg)?;
    let json_path = persist_result(out_dir, &result)?;
    eprintln!("sweep finished in {:.1}s -> {}", result.wall_seconds, json_path.display());
    for p in &result.points {
        println!(
            "d={} n={} lambda={} mean_error={} stderr={}",
            p.d,
            p.n,
            fmt_float(p.lambda),
            fmt_float(p.mean_error),
            fmt_float(p.std_error)
        );
    }
    if let Ok(slope) = fit_loglog_slope(&result, cfg.drop_fraction) {
        println!(
            "loglog_slope={} stderr={} r2={}",
            fmt_float(slope.slope),
            fmt_float(slope.std_error),
            fmt_float(slope.r2_fit)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<ExitCode, AnyError> {
    let cfg = load_config(config, seed)?;
    let (json_path, _) = result_paths(out_dir, &cfg.hash());
    let result = if json_path.exists() {
        eprintln!("using cached sweep {}", json_path.display());
        SweepResult::from_json(&std::fs::read_to_string(&json_path)?)?
    } else {
        let result = run_sweep(&cfg)?;
        persist_result(out_dir, &result)?;
        result
    };
    let report = verify_theory(&cfg, &result)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
