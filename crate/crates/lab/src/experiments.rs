//! The sweep harness: for each dimension `d` draw `n = ceil(d^gamma)`
//! samples, fit KRR at the configured regularization, estimate the
//! generalization error on fresh draws, repeat over seeded trials, and fit
//! a log-log slope through the per-`d` mean errors.
//!
//! Determinism: every trial's generator is derived from
//! `(root_seed, d, stream)` by a SplitMix64-style mix, so results are
//! byte-identical across reruns and invariant to worker scheduling.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use krrlab_core::kernels::ProductKernel;
use krrlab_core::krr::{fit, TrainingSet};
use krrlab_core::rates::{exact_rate, minimax_rate, RateCase, RegimeQuery};
use krrlab_core::targets::TargetSpec;

use crate::formats::{FormatError, LambdaRule, SweepConfig, SweepPoint, SweepResult};

/// Stream tags for per-purpose generators at fixed `(root_seed, d)`.
const TARGET_STREAM: u64 = u64::MAX;
const PILOT_STREAM_BASE: u64 = u64::MAX - 1_000_000;

#[derive(Debug)]
pub enum SweepError {
    Format(FormatError),
    /// The theoretical schedule is undefined at this `(gamma, s)`.
    ScheduleNotCovered { gamma: f64, s: f64 },
    /// More than 10% of trials failed to fit.
    TooManyFailures { failed: usize, total: usize },
    /// Slope fitting needs at least three retained points.
    TooFewPoints { retained: usize },
    Fit(String),
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepError::Format(e) => write!(f, "{e}"),
            SweepError::ScheduleNotCovered { gamma, s } => write!(
                f,
                "no covered rate regime at gamma = {gamma}, s = {s}; pick a different \
                 lambda rule or regime"
            ),
            SweepError::TooManyFailures { failed, total } => {
                write!(f, "{failed} of {total} trials failed to fit")
            }
            SweepError::TooFewPoints { retained } => {
                write!(f, "slope fit needs >= 3 points, only {retained} retained")
            }
            SweepError::Fit(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for SweepError {}

impl From<FormatError> for SweepError {
    fn from(e: FormatError) -> Self {
        SweepError::Format(e)
    }
}

/// Mixes `(root, d, stream)` into one 64-bit seed (SplitMix64 finalizer).
pub fn derive_seed(root: u64, d: u64, stream: u64) -> u64 {
    let mut z = root
        ^ d.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trial_rng(root: u64, d: usize, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, d as u64, stream))
}

/// Size of the worker pool: the `KRRLAB_WORKERS` variable when set,
/// otherwise the rayon default (one per core).
pub fn worker_count() -> Option<usize> {
    std::env::var("KRRLAB_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&w| w > 0)
}

/// Runs one trial: fresh design, Gaussian noise, fit, Monte-Carlo error.
fn run_trial(
    kernel: &ProductKernel,
    target: &TargetSpec,
    cfg: &SweepConfig,
    n: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    test_m: usize,
) -> Result<f64, String> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| kernel.sample_input(rng)).collect();
    let noise = Normal::new(0.0, cfg.sigma_eps).map_err(|e| e.to_string())?;
    let y: Vec<f64> = rows
        .iter()
        .map(|row| {
            let truth = target.evaluate(row).map_err(|e| e.to_string())?;
            Ok::<f64, String>(truth + if cfg.sigma_eps > 0.0 { noise.sample(rng) } else { 0.0 })
        })
        .collect::<Result<_, _>>()?;
    let data = TrainingSet::from_rows(&rows, y).map_err(|e| e.to_string())?;
    let model = fit(kernel, &data, lambda).map_err(|e| e.to_string())?;
    let err = model.generalization_error(target, test_m, rng).map_err(|e| e.to_string())?;
    Ok(err.mean)
}

fn schedule_lambda(cfg: &SweepConfig, d: usize) -> Result<f64, SweepError> {
    match &cfg.lambda_rule {
        LambdaRule::Fixed { value } => Ok(*value),
        LambdaRule::TheoreticalSchedule { constant } => {
            let q = RegimeQuery::new(cfg.gamma, cfg.source_s)
                .map_err(|e| SweepError::Fit(e.to_string()))?;
            let rate = exact_rate(&q);
            let l = rate.lambda_exponent.ok_or(SweepError::ScheduleNotCovered {
                gamma: cfg.gamma,
                s: cfg.source_s,
            })?;
            let mut lambda = constant * (d as f64).powf(-l);
            if rate.lambda_ln_d_multiplier {
                lambda *= (d as f64).ln();
            }
            Ok(lambda)
        }
        LambdaRule::GridSearchOracle => unreachable!("resolved by the caller"),
    }
}

/// Pilot-trial argmin over `lambda = d^-l` for the grid-search oracle rule.
fn grid_search_lambda(
    cfg: &SweepConfig,
    kernel: &ProductKernel,
    target: &TargetSpec,
    d: usize,
    n: usize,
) -> Result<f64, SweepError> {
    let steps = 17usize;
    let pilot_m = (cfg.test_m / 4).max(200);
    let mut best = (f64::INFINITY, 1e-3);
    for i in 0..steps {
        let l = cfg.gamma * (0.1 + 0.8 * i as f64 / (steps - 1) as f64);
        let lambda = (d as f64).powf(-l);
        let mut rng = trial_rng(cfg.root_seed, d, PILOT_STREAM_BASE + i as u64);
        match run_trial(kernel, target, cfg, n, lambda, &mut rng, pilot_m) {
            Ok(err) if err < best.0 => best = (err, lambda),
            _ => {}
        }
    }
    Ok(best.1)
}

fn sweep_point(cfg: &SweepConfig, d: usize) -> Result<SweepPoint, SweepError> {
    let n = (d as f64).powf(cfg.gamma).ceil() as usize;
    let kernel = cfg.kernel.with_dimension(d)?.build()?;
    let mut target_rng = trial_rng(cfg.root_seed, d, TARGET_STREAM);
    let target = cfg.target.build(&kernel, &mut target_rng)?;

    let lambda = match &cfg.lambda_rule {
        LambdaRule::GridSearchOracle => grid_search_lambda(cfg, &kernel, &target, d, n)?,
        _ => schedule_lambda(cfg, d)?,
    };

    let outcomes: Vec<Result<f64, String>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.root_seed, d, trial as u64);
            run_trial(&kernel, &target, cfg, n, lambda, &mut rng, cfg.test_m)
        })
        .collect();

    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed * 10 > cfg.trials {
        return Err(SweepError::TooManyFailures { failed, total: cfg.trials });
    }
    if failed > 0 {
        eprintln!("warning: d = {d}: {failed} of {} trials failed and were excluded", cfg.trials);
    }
    let trial_errors: Vec<f64> = outcomes.into_iter().filter_map(Result::ok).collect();
    let count = trial_errors.len() as f64;
    let mean_error = trial_errors.iter().sum::<f64>() / count;
    let std_error = if trial_errors.len() > 1 {
        let var = trial_errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>()
            / (count - 1.0);
        (var / count).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(SweepPoint { d, n, lambda, mean_error, std_error, trial_errors, failed_trials: failed })
}

/// Runs the full sweep described by `cfg`. Deterministic for a fixed
/// `(config, root_seed)`; trials are distributed over the worker pool.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult, SweepError> {
    cfg.validate()?;
    let started = Instant::now();

    let run = || -> Result<Vec<SweepPoint>, SweepError> {
        cfg.d_list.iter().map(|&d| sweep_point(cfg, d)).collect()
    };
    let points = match worker_count() {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SweepError::Fit(e.to_string()))?
            .install(run),
        None => run(),
    }?;

    Ok(SweepResult {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        points,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Ordinary least squares of `ln(mean_error)` on `ln(d)`.
#[derive(Clone, Copy, Debug)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_error: f64,
    pub r2_fit: f64,
    pub retained_points: usize,
}

/// Fits the log-log slope after dropping the smallest-`d` fraction of the
/// sweep (pre-asymptotic transients).
pub fn fit_loglog_slope(result: &SweepResult, drop_fraction: f64) -> Result<SlopeFit, SweepError> {
    let total = result.points.len();
    let dropped = (drop_fraction * total as f64).floor() as usize;
    let retained = &result.points[dropped.min(total)..];
    if retained.len() < 3 {
        return Err(SweepError::TooFewPoints { retained: retained.len() });
    }

    let xs: Vec<f64> = retained.iter().map(|p| (p.d as f64).ln()).collect();
    let ys: Vec<f64> = retained.iter().map(|p| p.mean_error.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 =
        xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fitted = intercept + slope * x;
            (y - fitted).powi(2)
        })
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let dof = (xs.len().max(3) - 2) as f64;
    let std_error = (ssr / dof / sxx).sqrt();
    let r2_fit = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(SlopeFit { slope, std_error, r2_fit, retained_points: retained.len() })
}

/// Comparison of the measured slope with the theoretical exponents.
#[derive(Clone, Debug, serde::Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub gamma: f64,
    pub source_s: f64,
    pub fitted_slope: f64,
    pub slope_std_error: f64,
    pub r2_fit: f64,
    pub exact_d_exponent: Option<f64>,
    pub exact_case: String,
    pub minimax_d_exponent: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub failed_trials: usize,
}

/// Fits the slope of a completed sweep and checks it against the exact-rate
/// exponent at the configured `(gamma, source_s)` within the configured
/// tolerance; the minimax exponent is reported alongside.
pub fn verify_theory(cfg: &SweepConfig, result: &SweepResult) -> Result<VerifyReport, SweepError> {
    let slope = fit_loglog_slope(result, cfg.drop_fraction)?;
    let q = RegimeQuery::new(cfg.gamma, cfg.source_s).map_err(|e| SweepError::Fit(e.to_string()))?;
    let exact = exact_rate(&q);
    let minimax = minimax_rate(&q);
    let pass = match exact.d_exponent {
        Some(expected) => (slope.slope - expected).abs() <= cfg.slope_tolerance,
        None => false,
    };
    Ok(VerifyReport {
        config_hash: result.config_hash.clone(),
        gamma: cfg.gamma,
        source_s: cfg.source_s,
        fitted_slope: slope.slope,
        slope_std_error: slope.std_error,
        r2_fit: slope.r2_fit,
        exact_d_exponent: exact.d_exponent,
        exact_case: format!("{:?}", exact.case),
        minimax_d_exponent: minimax.d_exponent,
        tolerance: cfg.slope_tolerance,
        pass,
        failed_trials: result.points.iter().map(|p| p.failed_trials).sum(),
    })
}

/// A rate result is usable for schedules only when covered.
pub fn schedule_is_covered(gamma: f64, s: f64) -> bool {
    RegimeQuery::new(gamma, s)
        .map(|q| exact_rate(&q).case != RateCase::NotCovered)
        .unwrap_or(false)
}
