//! Kernel ridge regression: the dual-form estimator, prediction,
//! Monte-Carlo generalization error, and the empirical bias-variance
//! decomposition.
//!
//! Fitting solves `(K(X,X) + n lambda I) alpha = y` through a symmetric
//! positive-definite (Cholesky) factorization. The shifted matrix is
//! positive definite in exact arithmetic; if roundoff defeats the
//! factorization at tiny `lambda`, a recorded diagonal jitter is escalated
//! (doubling, at most six times) before giving up.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::kernels::{KernelError, ProductKernel};
use crate::targets::{TargetError, TargetSpec};
use crate::util::KahanSum;

#[derive(Clone, Debug, PartialEq)]
pub enum KrrError {
    InvalidLambda { lambda: f64 },
    EmptyTrainingSet,
    NonFiniteResponse { index: usize },
    RowLengthMismatch { expected: usize, got: usize },
    ResponseCountMismatch { rows: usize, responses: usize },
    /// Cholesky failed even after the jitter escalation.
    FactorizationFailed { attempts: usize, last_jitter: f64 },
    Kernel(KernelError),
    Target(TargetError),
}

impl From<KernelError> for KrrError {
    fn from(e: KernelError) -> Self {
        KrrError::Kernel(e)
    }
}

impl From<TargetError> for KrrError {
    fn from(e: TargetError) -> Self {
        KrrError::Target(e)
    }
}

impl core::fmt::Display for KrrError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KrrError::InvalidLambda { lambda } => {
                write!(f, "lambda must be positive, got {lambda}")
            }
            KrrError::EmptyTrainingSet => write!(f, "training set is empty"),
            KrrError::NonFiniteResponse { index } => {
                write!(f, "response {index} is not finite")
            }
            KrrError::RowLengthMismatch { expected, got } => {
                write!(f, "input row has length {got}, expected {expected}")
            }
            KrrError::ResponseCountMismatch { rows, responses } => {
                write!(f, "{rows} input rows but {responses} responses")
            }
            KrrError::FactorizationFailed { attempts, last_jitter } => write!(
                f,
                "kernel system factorization failed after {attempts} jitter escalations \
                 (last jitter {last_jitter:e})"
            ),
            KrrError::Kernel(e) => write!(f, "{e}"),
            KrrError::Target(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KrrError {}

/// Training inputs (row-major `n x d`) and responses.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
}

impl TrainingSet {
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self, KrrError> {
        if rows.is_empty() {
            return Err(KrrError::EmptyTrainingSet);
        }
        if rows.len() != y.len() {
            return Err(KrrError::ResponseCountMismatch { rows: rows.len(), responses: y.len() });
        }
        let d = rows[0].len();
        let mut x = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(KrrError::RowLengthMismatch { expected: d, got: row.len() });
            }
            x.extend_from_slice(row);
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(KrrError::NonFiniteResponse { index: i });
            }
        }
        Ok(Self { x, y, n: rows.len(), d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }
}

/// A fitted KRR model: retained inputs, dual coefficients, and the solve
/// diagnostics. Immutable; prediction is read-only.
#[derive(Clone, Debug)]
pub struct KrrModel {
    kernel: ProductKernel,
    x: Vec<f64>,
    n: usize,
    d: usize,
    alpha: Vec<f64>,
    lambda: f64,
    jitter: f64,
    dual_residual: f64,
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct ErrorEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Empirical bias-variance split of the conditional expected error.
#[derive(Clone, Copy, Debug)]
pub struct BiasVariance {
    pub bias2: f64,
    pub bias2_std_error: f64,
    pub variance: f64,
    pub variance_std_error: f64,
    pub jitter: f64,
}

/// Fits `(K + n lambda I) alpha = y`.
pub fn fit(kernel: &ProductKernel, data: &TrainingSet, lambda: f64) -> Result<KrrModel, KrrError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KrrError::InvalidLambda { lambda });
    }
    if data.d() != kernel.d() {
        return Err(KrrError::RowLengthMismatch { expected: kernel.d(), got: data.d() });
    }
    let n = data.n();
    let rows: Vec<&[f64]> = (0..n).map(|i| data.row(i)).collect();
    let gram = gram_matrix(kernel, &rows)?;

    let shift = n as f64 * lambda;
    let mut system = gram.clone();
    for i in 0..n {
        system[i * n + i] += shift;
    }

    let (factor, jitter) = cholesky_with_jitter(system, n)?;
    let mut alpha = data.responses().to_vec();
    cholesky_solve_in_place(&factor, n, &mut alpha);

    // One refinement pass against the unjittered system tightens the dual
    // residual when lambda is tiny.
    let mut residual = dual_residual(&gram, shift, &alpha, data.responses());
    let y_norm = norm(data.responses());
    if residual > 1e-12 * y_norm {
        let mut r = residual_vector(&gram, shift, &alpha, data.responses());
        cholesky_solve_in_place(&factor, n, &mut r);
        for (a, delta) in alpha.iter_mut().zip(&r) {
            *a += delta;
        }
        residual = dual_residual(&gram, shift, &alpha, data.responses());
    }

    Ok(KrrModel {
        kernel: kernel.clone(),
        x: data.x.clone(),
        n,
        d: data.d(),
        alpha,
        lambda,
        jitter,
        dual_residual: if y_norm > 0.0 { residual / y_norm } else { residual },
    })
}

impl KrrModel {
    pub fn kernel(&self) -> &ProductKernel {
        &self.kernel
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Diagonal jitter the factorization needed (0 in the usual case).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Relative residual of `(K + n lambda I) alpha = y` after the fit.
    pub fn dual_residual(&self) -> f64 {
        self.dual_residual
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn training_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// `K(x, X) alpha`.
    pub fn predict(&self, x: &[f64]) -> Result<f64, KrrError> {
        if x.len() != self.d {
            return Err(KrrError::RowLengthMismatch { expected: self.d, got: x.len() });
        }
        let mut acc = KahanSum::new();
        for (i, &a) in self.alpha.iter().enumerate() {
            acc.add(a * self.kernel.eval(x, self.training_row(i))?);
        }
        Ok(acc.value())
    }

    /// Mean squared prediction error against `target` over `m` fresh draws
    /// from the product measure, with the Monte-Carlo standard error.
    pub fn generalization_error<R: Rng + ?Sized>(
        &self,
        target: &TargetSpec,
        m: usize,
        rng: &mut R,
    ) -> Result<ErrorEstimate, KrrError> {
        let mut sum = KahanSum::new();
        let mut sum_sq = KahanSum::new();
        for _ in 0..m {
            let x = self.kernel.sample_input(rng);
            let diff = self.predict(&x)? - target.evaluate(&x)?;
            let sq = diff * diff;
            sum.add(sq);
            sum_sq.add(sq * sq);
        }
        Ok(mc_estimate(sum.value(), sum_sq.value(), m))
    }

    /// Training-set mean squared residual, used by the shrinkage
    /// monotonicity checks.
    pub fn training_mse(&self, data: &TrainingSet) -> Result<f64, KrrError> {
        let mut acc = KahanSum::new();
        for i in 0..data.n() {
            let diff = self.predict(data.row(i))? - data.responses()[i];
            acc.add(diff * diff);
        }
        Ok(acc.value() / data.n() as f64)
    }
}

fn mc_estimate(sum: f64, sum_sq: f64, m: usize) -> ErrorEstimate {
    let mean = sum / m as f64;
    let var = (sum_sq / m as f64 - mean * mean).max(0.0);
    let std_error = if m > 1 { (var / (m as f64 - 1.0)).sqrt() } else { f64::INFINITY };
    ErrorEstimate { mean, std_error }
}

/// Empirical bias-variance decomposition of the error conditional on the
/// design `inputs`:
///
/// - `bias2`: Monte-Carlo `L2` error of the noiseless fit (the conditional
///   mean of the estimator),
/// - `variance`: `sigma_eps^2 E_x | (K + n lambda I)^{-1} K(X, x) |^2`,
///   the exact noise-average of the prediction variance.
pub fn bias_variance<R: Rng + ?Sized>(
    kernel: &ProductKernel,
    inputs: &[Vec<f64>],
    target: &TargetSpec,
    sigma_eps: f64,
    lambda: f64,
    m: usize,
    rng: &mut R,
) -> Result<BiasVariance, KrrError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(KrrError::InvalidLambda { lambda });
    }
    if sigma_eps < 0.0 || !sigma_eps.is_finite() {
        return Err(KrrError::NonFiniteResponse { index: 0 });
    }
    if inputs.is_empty() {
        return Err(KrrError::EmptyTrainingSet);
    }
    let n = inputs.len();
    let rows: Vec<&[f64]> = inputs.iter().map(|r| r.as_slice()).collect();
    let gram = gram_matrix(kernel, &rows)?;
    let shift = n as f64 * lambda;
    let mut system = gram;
    for i in 0..n {
        system[i * n + i] += shift;
    }
    let (factor, jitter) = cholesky_with_jitter(system, n)?;

    // Noiseless dual coefficients give the conditional-mean predictor.
    let mut alpha0 = Vec::with_capacity(n);
    for row in &rows {
        alpha0.push(target.evaluate(row)?);
    }
    cholesky_solve_in_place(&factor, n, &mut alpha0);

    let sigma_sq = sigma_eps * sigma_eps;
    let mut bias_sum = KahanSum::new();
    let mut bias_sq_sum = KahanSum::new();
    let mut var_sum = KahanSum::new();
    let mut var_sq_sum = KahanSum::new();
    let mut section = alloc::vec![0.0; n];
    for _ in 0..m {
        let x = kernel.sample_input(rng);
        for (dst, row) in section.iter_mut().zip(&rows) {
            *dst = kernel.eval(&x, row)?;
        }
        let mean_prediction: f64 =
            section.iter().zip(&alpha0).map(|(k, a)| k * a).collect::<KahanSum>().value();
        let bias_diff = mean_prediction - target.evaluate(&x)?;
        bias_sum.add(bias_diff * bias_diff);
        bias_sq_sum.add(bias_diff.powi(4));

        // sigma^2 |M^-1 K(X,x)|^2 with M = K + n lambda I.
        let mut t = section.clone();
        cholesky_solve_in_place(&factor, n, &mut t);
        let quad: f64 = t.iter().map(|v| v * v).collect::<KahanSum>().value();
        let var_term = sigma_sq * quad;
        var_sum.add(var_term);
        var_sq_sum.add(var_term * var_term);
    }

    let bias = mc_estimate(bias_sum.value(), bias_sq_sum.value(), m);
    let variance = mc_estimate(var_sum.value(), var_sq_sum.value(), m);
    Ok(BiasVariance {
        bias2: bias.mean,
        bias2_std_error: bias.std_error,
        variance: variance.mean,
        variance_std_error: variance.std_error,
        jitter,
    })
}

/// Symmetric Gram matrix `K[i][j] = k(x_i, x_j)`, filled on the upper
/// triangle and mirrored, so symmetry holds by construction.
fn gram_matrix(kernel: &ProductKernel, rows: &[&[f64]]) -> Result<Vec<f64>, KrrError> {
    let n = rows.len();
    let mut gram = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(rows[i], rows[j])?;
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    Ok(gram)
}

/// In-place lower Cholesky; on failure returns the pivot index.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), usize> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(j);
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    // Zero the strict upper triangle so the factor is self-describing.
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Factorizes `system`, escalating a recorded diagonal jitter on failure:
/// starting at `1e-12 * trace / n` and doubling at most six times.
fn cholesky_with_jitter(system: Vec<f64>, n: usize) -> Result<(Vec<f64>, f64), KrrError> {
    let trace: f64 = (0..n).map(|i| system[i * n + i]).sum();
    let base_jitter = 1e-12 * trace / n as f64;

    let mut attempt = system.clone();
    if cholesky_in_place(&mut attempt, n).is_ok() {
        return Ok((attempt, 0.0));
    }
    let mut jitter = base_jitter;
    for _ in 0..=6 {
        let mut attempt = system.clone();
        for i in 0..n {
            attempt[i * n + i] += jitter;
        }
        if cholesky_in_place(&mut attempt, n).is_ok() {
            return Ok((attempt, jitter));
        }
        jitter *= 2.0;
    }
    Err(KrrError::FactorizationFailed { attempts: 7, last_jitter: jitter / 2.0 })
}

/// Solves `L L^T x = b` in place given the lower factor.
fn cholesky_solve_in_place(factor: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= factor[i * n + k] * b[k];
        }
        b[i] = v / factor[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= factor[k * n + i] * b[k];
        }
        b[i] = v / factor[i * n + i];
    }
}

fn residual_vector(gram: &[f64], shift: f64, alpha: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = KahanSum::new();
        for j in 0..n {
            acc.add(gram[i * n + j] * alpha[j]);
        }
        acc.add(shift * alpha[i]);
        r.push(y[i] - acc.value());
    }
    r
}

fn dual_residual(gram: &[f64], shift: f64, alpha: &[f64], y: &[f64]) -> f64 {
    norm(&residual_vector(gram, shift, alpha, y))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
