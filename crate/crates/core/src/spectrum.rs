//! Staircase spectrum models for product kernels, the spectral functionals
//! that govern kernel ridge regression (effective dimensions `N1`, `N2`, the
//! bias functional `R2`, the sup-norm envelope of the regularized target),
//! their large-`d` asymptotic scales, and numeric hypothesis checkers.
//!
//! A product of `d` one-dimensional factors with geometric eigendecay has
//! eigenvalues indexed by multi-indices; grouping by total degree `k` puts
//! every level-`k` eigenvalue at `Theta(d^-k)` with multiplicity
//! `binom(k+d-1, d-1) = Theta(d^k)` — the staircase. Identical factors admit
//! a fast path (one value per level); heterogeneous factors are enumerated
//! exactly under a budget.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::kernels::ProductKernel;
use crate::specfun::ln_gamma;
use crate::util::KahanSum;

/// Largest per-level multiplicity accepted by exact enumeration.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Levels appended past `k_max` when resolving functional tails.
const TAIL_LEVELS: usize = 4000;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumError {
    /// Exact enumeration would exceed [`ENUMERATION_BUDGET`]; build with
    /// identical factors to use the uniform fast path, or lower `k_max`/`d`.
    EnumerationBudgetExceeded { level: usize, required_ln: f64 },
    InvalidLambda { lambda: f64 },
    /// Coefficient masses extend past the modeled levels.
    LevelCountMismatch { coefficient_levels: usize, spectrum_levels: usize },
    /// Sum of coefficient masses exceeds the norm budget `R1^2`.
    NormBudgetExceeded { mass_sum: f64, r1_squared: f64 },
    InvalidParameter { what: &'static str, value: f64 },
}

impl core::fmt::Display for SpectrumError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpectrumError::EnumerationBudgetExceeded { level, required_ln } => write!(
                f,
                "level {level} needs e^{required_ln:.1} eigenvalues, above the exact-enumeration \
                 budget of {ENUMERATION_BUDGET}; use identical factors (uniform fast path) or a \
                 smaller k_max"
            ),
            SpectrumError::InvalidLambda { lambda } => {
                write!(f, "lambda must be positive, got {lambda}")
            }
            SpectrumError::LevelCountMismatch { coefficient_levels, spectrum_levels } => write!(
                f,
                "coefficient spec has {coefficient_levels} levels, spectrum only models \
                 {spectrum_levels}"
            ),
            SpectrumError::NormBudgetExceeded { mass_sum, r1_squared } => {
                write!(f, "coefficient masses sum to {mass_sum}, above R1^2 = {r1_squared}")
            }
            SpectrumError::InvalidParameter { what, value } => {
                write!(f, "invalid parameter {what} = {value}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpectrumError {}

/// Exact level multiplicity `N(d, k) = binom(k+d-1, d-1)`, or `None` when it
/// overflows `u128`.
pub fn multiplicity(d: usize, k: usize) -> Option<u128> {
    if d == 0 {
        return None;
    }
    // binom(k+d-1, k): running product stays integral at every step.
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c.checked_mul(d as u128 - 1 + i)? / i;
    }
    Some(c)
}

/// `ln N(d, k)`, usable far beyond the exact-integer range.
pub fn ln_multiplicity(d: usize, k: usize) -> f64 {
    ln_gamma((k + d) as f64) - ln_gamma(k as f64 + 1.0) - ln_gamma(d as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumMode {
    /// Per-level eigenvalue lists formed from all multi-indices (small `d`).
    ExactEnumeration,
    /// One value per level with multiplicity `N(d, k)` (identical factors).
    UniformFactorFastPath,
}

#[derive(Clone, Debug)]
enum LevelValues {
    Uniform(f64),
    Explicit(Vec<f64>),
}

/// One staircase level: its degree, multiplicity, and eigenvalues.
#[derive(Clone, Debug)]
pub struct LevelSpec {
    k: usize,
    ln_mult: f64,
    exact_mult: Option<u128>,
    values: LevelValues,
}

impl LevelSpec {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ln_multiplicity(&self) -> f64 {
        self.ln_mult
    }

    pub fn exact_multiplicity(&self) -> Option<u128> {
        self.exact_mult
    }

    /// Representative eigenvalue: the common value in uniform mode, the
    /// level mean in exact mode.
    pub fn representative(&self) -> f64 {
        match &self.values {
            LevelValues::Uniform(v) => *v,
            LevelValues::Explicit(vs) => {
                vs.iter().collect::<KahanSum>().value() / vs.len() as f64
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.values {
            LevelValues::Uniform(v) => *v,
            LevelValues::Explicit(vs) => vs.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        match &self.values {
            LevelValues::Uniform(v) => *v,
            LevelValues::Explicit(vs) => vs.iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn explicit_eigenvalues(&self) -> Option<&[f64]> {
        match &self.values {
            LevelValues::Uniform(_) => None,
            LevelValues::Explicit(vs) => Some(vs),
        }
    }

    /// Sums `g(mu)` over every eigenvalue of the level, multiplicities
    /// included. Uniform levels with huge multiplicities go through
    /// `exp(ln N + ln g)` so nothing overflows.
    fn sum_over_eigenvalues(&self, g: impl Fn(f64) -> f64) -> f64 {
        match &self.values {
            LevelValues::Uniform(v) => {
                let term = g(*v);
                if term == 0.0 {
                    return 0.0;
                }
                match self.exact_mult {
                    Some(m) if m <= (1u128 << 53) => m as f64 * term,
                    _ => (self.ln_mult + term.ln()).exp(),
                }
            }
            LevelValues::Explicit(vs) => vs.iter().map(|&v| g(v)).collect::<KahanSum>().value(),
        }
    }
}

/// Spectrum of a product kernel truncated at level `k_max`, either exact or
/// uniform-fast-path. Immutable once built.
#[derive(Clone, Debug)]
pub struct SpectrumModel {
    d: usize,
    mode: SpectrumMode,
    levels: Vec<LevelSpec>,
    /// Geometric data for extrapolating tails past `k_max`: the per-level
    /// value ratio (uniform) or the largest factor decay rate (exact).
    tail_ratio: f64,
}

/// A value alongside the estimated contribution of the unmodeled tail
/// (levels beyond `k_max`).
#[derive(Clone, Copy, Debug)]
pub struct FunctionalValue {
    pub value: f64,
    pub tail_estimate: f64,
}

impl SpectrumModel {
    /// Builds the spectrum, choosing the uniform fast path for identical
    /// factors and exact enumeration otherwise.
    pub fn build(pk: &ProductKernel, k_max: usize) -> Result<Self, SpectrumError> {
        if pk.is_uniform() {
            Self::build_uniform(pk, k_max)
        } else {
            Self::build_exact(pk, k_max)
        }
    }

    fn build_uniform(pk: &ProductKernel, k_max: usize) -> Result<Self, SpectrumError> {
        let d = pk.d();
        let factor = pk.factors()[0];
        let r = factor.decay_rate();
        // mu_0^d stays Theta(1) for the admissible constructions but is
        // formed in log space anyway.
        let mu0_prod = (d as f64 * factor.leading_eigenvalue().ln()).exp();
        let levels = (0..=k_max)
            .map(|k| LevelSpec {
                k,
                ln_mult: ln_multiplicity(d, k),
                exact_mult: multiplicity(d, k),
                values: LevelValues::Uniform(mu0_prod * r.powi(k as i32)),
            })
            .collect();
        Ok(Self { d, mode: SpectrumMode::UniformFactorFastPath, levels, tail_ratio: r })
    }

    /// Forces exact multi-index enumeration (works for identical factors
    /// too, which the equivalence tests exploit).
    pub fn build_exact(pk: &ProductKernel, k_max: usize) -> Result<Self, SpectrumError> {
        let d = pk.d();
        for k in 0..=k_max {
            let within = multiplicity(d, k).map_or(false, |m| m <= ENUMERATION_BUDGET);
            if !within {
                return Err(SpectrumError::EnumerationBudgetExceeded {
                    level: k,
                    required_ln: ln_multiplicity(d, k),
                });
            }
        }

        // Per-factor eigenvalue tables up to degree k_max.
        let tables: Vec<Vec<f64>> = pk
            .factors()
            .iter()
            .map(|f| (0..=k_max).map(|j| f.eigenvalue(j)).collect())
            .collect();

        let mut levels = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let mut values = Vec::with_capacity(multiplicity(d, k).unwrap() as usize);
            enumerate_level(&tables, 0, k, 1.0, &mut values);
            debug_assert_eq!(values.len() as u128, multiplicity(d, k).unwrap());
            levels.push(LevelSpec {
                k,
                ln_mult: ln_multiplicity(d, k),
                exact_mult: multiplicity(d, k),
                values: LevelValues::Explicit(values),
            });
        }
        let tail_ratio =
            pk.factors().iter().map(|f| f.decay_rate()).fold(0.0, f64::max);
        Ok(Self { d, mode: SpectrumMode::ExactEnumeration, levels, tail_ratio })
    }

    /// Synthetic spectrum from explicit per-level eigenvalue lists, for
    /// custom instances and tests. Level `k` takes `levels[k]`.
    pub fn from_explicit_levels(d: usize, levels: Vec<Vec<f64>>) -> Result<Self, SpectrumError> {
        if d == 0 {
            return Err(SpectrumError::InvalidParameter { what: "d", value: 0.0 });
        }
        let specs = levels
            .into_iter()
            .enumerate()
            .map(|(k, vs)| {
                if vs.is_empty() || vs.iter().any(|&v| !(v > 0.0)) {
                    return Err(SpectrumError::InvalidParameter {
                        what: "eigenvalue",
                        value: vs.iter().cloned().find(|&v| !(v > 0.0)).unwrap_or(f64::NAN),
                    });
                }
                Ok(LevelSpec {
                    k,
                    ln_mult: (vs.len() as f64).ln(),
                    exact_mult: Some(vs.len() as u128),
                    values: LevelValues::Explicit(vs),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { d, mode: SpectrumMode::ExactEnumeration, levels: specs, tail_ratio: 0.0 })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> SpectrumMode {
        self.mode
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn k_max(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Staircase constants `(c1, c2)` such that every modeled level-`k`
    /// eigenvalue lies in `[c1 d^-k, c2 d^-k]`.
    pub fn staircase_constants(&self) -> (f64, f64) {
        let d = self.d as f64;
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        for level in &self.levels {
            let scale = d.powi(level.k as i32);
            c1 = c1.min(level.min_eigenvalue() * scale);
            c2 = c2.max(level.max_eigenvalue() * scale);
        }
        (c1, c2)
    }

    fn check_lambda(lambda: f64) -> Result<(), SpectrumError> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(SpectrumError::InvalidLambda { lambda })
        }
    }

    /// Sums `g(mu)` over modeled levels and extrapolates the same sum over
    /// `TAIL_LEVELS` further levels for the tail estimate.
    fn functional(&self, g: impl Fn(f64) -> f64) -> FunctionalValue {
        let mut acc = KahanSum::new();
        for level in &self.levels {
            acc.add(level.sum_over_eigenvalues(&g));
        }
        let value = acc.value();

        // Tail: continue the staircase geometrically from the last level's
        // representative value.
        let mut tail = 0.0;
        if self.tail_ratio > 0.0 {
            if let Some(last) = self.levels.last() {
                let mut mu = last.representative();
                for k in (last.k + 1)..(last.k + 1 + TAIL_LEVELS) {
                    mu *= self.tail_ratio;
                    let term = g(mu);
                    let contribution = if term > 0.0 {
                        (ln_multiplicity(self.d, k) + term.ln()).exp()
                    } else {
                        0.0
                    };
                    tail += contribution;
                    if contribution < 1e-18 * (value.abs() + tail) {
                        break;
                    }
                }
            }
        }
        FunctionalValue { value, tail_estimate: tail }
    }

    /// Effective dimension `N1(lambda) = sum_i lambda_i / (lambda_i + lambda)`.
    pub fn n1(&self, lambda: f64) -> Result<FunctionalValue, SpectrumError> {
        Self::check_lambda(lambda)?;
        Ok(self.functional(|mu| mu / (mu + lambda)))
    }

    /// Squared-ratio effective dimension
    /// `N2(lambda) = sum_i (lambda_i / (lambda_i + lambda))^2`.
    pub fn n2(&self, lambda: f64) -> Result<FunctionalValue, SpectrumError> {
        Self::check_lambda(lambda)?;
        Ok(self.functional(|mu| {
            let t = mu / (mu + lambda);
            t * t
        }))
    }

    /// Squared bias functional
    /// `R2(lambda) = sum_k (lambda / (mu_k + lambda))^2 mu_k^s m_k`
    /// from per-level coefficient masses `m_k = sum_j mu_{k,j}^{-s} f_{k,j}^2`.
    pub fn r2(&self, coeffs: &CoefficientSpec, lambda: f64) -> Result<f64, SpectrumError> {
        Self::check_lambda(lambda)?;
        self.check_coeff_levels(coeffs)?;
        let s = coeffs.source();
        let mut acc = KahanSum::new();
        for (level, &mass) in self.levels.iter().zip(coeffs.masses()) {
            let mu = level.representative();
            let ratio = lambda / (mu + lambda);
            acc.add(ratio * ratio * mu.powf(s) * mass);
        }
        Ok(acc.value())
    }

    /// Upper bound on the sup norm of the lambda-regularized target:
    /// `kappa * sqrt( sum_k mu_k^(1+s) / (mu_k + lambda)^2 * m_k )`.
    pub fn f_lambda_sup_bound(
        &self,
        coeffs: &CoefficientSpec,
        lambda: f64,
        kappa: f64,
    ) -> Result<f64, SpectrumError> {
        Self::check_lambda(lambda)?;
        self.check_coeff_levels(coeffs)?;
        let s = coeffs.source();
        let mut acc = KahanSum::new();
        for (level, &mass) in self.levels.iter().zip(coeffs.masses()) {
            let mu = level.representative();
            let denom = mu + lambda;
            acc.add(mu.powf(1.0 + s) / (denom * denom) * mass);
        }
        Ok(kappa * acc.value().sqrt())
    }

    fn check_coeff_levels(&self, coeffs: &CoefficientSpec) -> Result<(), SpectrumError> {
        if coeffs.masses().len() > self.levels.len() {
            Err(SpectrumError::LevelCountMismatch {
                coefficient_levels: coeffs.masses().len(),
                spectrum_levels: self.levels.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Numeric report on the smallness/largeness conditions the exact-rate
    /// theory requires of `(n, lambda)`. Always returns a report; `pass`
    /// applies the configured cutoff to each asymptotic condition.
    pub fn check_conditions(
        &self,
        coeffs: &CoefficientSpec,
        n: usize,
        lambda: f64,
        s: f64,
        epsilon: f64,
        options: &CheckOptions,
    ) -> Result<ConditionReport, SpectrumError> {
        Self::check_lambda(lambda)?;
        let nf = n as f64;
        let ln_n = nf.ln();
        let n1 = self.n1(lambda)?.value;
        let n2 = self.n2(lambda)?.value;
        let r2 = self.r2(coeffs, lambda)?;
        let flam = self.f_lambda_sup_bound(coeffs, lambda, options.kappa)?;

        let frac = options.smallness_fraction;
        let mut entries = Vec::new();
        let mut push = |name: &'static str, small: f64, large: f64| {
            entries.push(ConditionEntry { name, small, large, pass: small <= frac * large });
        };
        push("n1_log_over_n", n1 * ln_n / nf, 1.0);
        push("inverse_n_lambda", 1.0 / (nf * lambda), 1.0);
        push("n2_lower", 1.0, n2);
        push("log_over_n_lambda_sq", ln_n / (nf * lambda * lambda), n2);
        if s < 1.0 {
            let left =
                (1.0 / lambda).sqrt() * (nf.powf((1.0 - s) / 2.0 + epsilon) + flam) / nf;
            let right = (n2 / nf).sqrt() + r2.sqrt();
            push("sup_norm_condition", left, right);
        }
        let all_pass = entries.iter().all(|e| e.pass);
        Ok(ConditionReport { n1, n2, r2, f_lambda_bound: flam, entries, all_pass })
    }
}

/// Depth-first walk over multi-indices of total degree `remaining` on the
/// factors `tables[from..]`, accumulating eigenvalue products.
fn enumerate_level(
    tables: &[Vec<f64>],
    from: usize,
    remaining: usize,
    product: f64,
    out: &mut Vec<f64>,
) {
    if from == tables.len() - 1 {
        out.push(product * tables[from][remaining]);
        return;
    }
    for j in 0..=remaining {
        enumerate_level(tables, from + 1, remaining - j, product * tables[from][j], out);
    }
}

/// Per-level coefficient masses of a regression target in the interpolation
/// scale: `m_k = sum_j mu_{k,j}^{-s} f_{k,j}^2`, with source exponent `s`
/// and norm budget `R1` (`sum_k m_k <= R1^2`).
#[derive(Clone, Debug)]
pub struct CoefficientSpec {
    masses: Vec<f64>,
    s: f64,
    r1: f64,
}

impl CoefficientSpec {
    pub fn new(masses: Vec<f64>, s: f64, r1: f64) -> Result<Self, SpectrumError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SpectrumError::InvalidParameter { what: "s", value: s });
        }
        if !(r1 > 0.0) || !r1.is_finite() {
            return Err(SpectrumError::InvalidParameter { what: "r1", value: r1 });
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(SpectrumError::InvalidParameter { what: "mass", value: f64::NAN });
        }
        let sum: f64 = masses.iter().collect::<KahanSum>().value();
        if sum > r1 * r1 * (1.0 + 1e-12) {
            return Err(SpectrumError::NormBudgetExceeded { mass_sum: sum, r1_squared: r1 * r1 });
        }
        Ok(Self { masses, s, r1 })
    }

    /// Equal mass on every level, with `R1` sized to fit exactly.
    pub fn uniform(levels: usize, mass: f64, s: f64) -> Result<Self, SpectrumError> {
        let masses = alloc::vec![mass; levels];
        let r1 = (mass * levels as f64).sqrt();
        Self::new(masses, s, r1)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn source(&self) -> f64 {
        self.s
    }

    pub fn norm_budget(&self) -> f64 {
        self.r1
    }

    /// Checks the coefficient-mass lower bound `m_k >= c0` for every level
    /// `k <= q`, where `q` is the smallest integer exceeding `gamma` whose
    /// level carries any mass.
    pub fn satisfies_mass_lower_bound(&self, c0: f64, gamma: f64) -> bool {
        let q = self
            .masses
            .iter()
            .enumerate()
            .find(|&(k, &m)| k as f64 > gamma && m > 0.0)
            .map(|(k, _)| k);
        match q {
            None => false,
            Some(q) => self.masses.iter().take(q + 1).all(|&m| m >= c0),
        }
    }
}

/// Options for [`SpectrumModel::check_conditions`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// A "much smaller than" condition passes when
    /// `small <= smallness_fraction * large`.
    pub smallness_fraction: f64,
    /// Diagonal bound used in the sup-norm condition.
    pub kappa: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { smallness_fraction: 0.1, kappa: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConditionEntry {
    pub name: &'static str,
    pub small: f64,
    pub large: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub n1: f64,
    pub n2: f64,
    pub r2: f64,
    pub f_lambda_bound: f64,
    pub entries: Vec<ConditionEntry>,
    pub all_pass: bool,
}

/// Asymptotic scales of the functionals at `lambda = d^-l`, with
/// `p = floor(l)` and `s~ = min(s, 2)`:
///
/// - `N1 ~ lambda^-1`
/// - `N2 ~ d^p + lambda^-2 d^-(p+1)`
/// - `R2 ~ lambda^2 d^((2-s~)p) + d^-(p+1)s~`
/// - `|f_lambda|_inf ~ d^((1-s)p/2) + lambda^-1 d^-((1+s)(p+1)/2)`
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticScales {
    pub p: usize,
    pub n1_scale: f64,
    pub n2_scale: f64,
    pub r2_scale: f64,
    pub flam_scale: f64,
}

pub fn asymptotic_functionals(d: usize, l: f64, s: f64) -> AsymptoticScales {
    assert!(d >= 1 && l > 0.0 && s > 0.0, "requires d >= 1, l > 0, s > 0");
    let df = d as f64;
    let p = l.floor() as usize;
    let pf = p as f64;
    let lambda = df.powf(-l);
    let s_tilde = s.min(2.0);
    AsymptoticScales {
        p,
        n1_scale: 1.0 / lambda,
        n2_scale: df.powf(pf) + df.powf(2.0 * l - (pf + 1.0)),
        r2_scale: lambda * lambda * df.powf((2.0 - s_tilde) * pf)
            + df.powf(-(pf + 1.0) * s_tilde),
        flam_scale: df.powf((1.0 - s) * pf / 2.0)
            + (1.0 / lambda) * df.powf(-(1.0 + s) * (pf + 1.0) / 2.0),
    }
}
