//! Piecewise convergence-rate theory for large-dimensional product-kernel
//! ridge regression in the regime `n ~ d^gamma`.
//!
//! For a source exponent `s` the gamma axis splits into blocks of width
//! `1 + s~` (`s~ = min(s, 2)` when `s >= 1`, `s~ = s` below), indexed by
//! `p = 0, 1, 2, ...`. Within each block the optimal regularization
//! `lambda = d^-l` and the resulting generalization-error exponent follow
//! one of three cases; the minimax benchmark has two. All intervals are
//! left-open, right-closed, and boundary values resolve to the left case's
//! closure. Rate exponents are reported with respect to `d`; the exponent
//! with respect to `n` is `d_exponent / gamma` exactly.

use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateError {
    InvalidParameter { what: &'static str, value: f64 },
}

impl core::fmt::Display for RateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RateError::InvalidParameter { what, value } => {
                write!(f, "invalid rate-query parameter {what} = {value}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RateError {}

/// A point on the `(gamma, s)` plane: sample size `n ~ c d^gamma` with
/// source condition `s`.
#[derive(Clone, Copy, Debug)]
pub struct RegimeQuery {
    pub gamma: f64,
    pub s: f64,
    /// The constant `c` in `n = c d^gamma`; affects only sample-size
    /// reconstruction, never the exponents. Defaults to 1.
    pub log_d_n_constant: Option<f64>,
}

impl RegimeQuery {
    pub fn new(gamma: f64, s: f64) -> Result<Self, RateError> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(RateError::InvalidParameter { what: "gamma", value: gamma });
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(RateError::InvalidParameter { what: "s", value: s });
        }
        Ok(Self { gamma, s, log_d_n_constant: None })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateCase {
    /// Variance-dominated: rate `d^(-gamma+p)`.
    I,
    /// Intermediate balance (`s >= 1` only): rate `d^(-(gamma-p+p*s~+1)/2)`.
    II,
    /// Bias-dominated plateau: rate `d^(-(p+1)s~)`.
    III,
    /// Minimax benchmark, variance side: `d^(-gamma+p)` up to `d^eps`.
    MinimaxI,
    /// Minimax benchmark, bias side: `d^(-(p+1)s)`.
    MinimaxII,
    /// `(gamma, s)` outside the proven range (`s <= 1/2` with
    /// `gamma <= 3s / (2(s+1))`).
    NotCovered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogFactor {
    None,
    /// Rate carries an `ln^2 n` multiplier (first block, variance case).
    Ln2N,
    /// Lower bound holds for every `eps > 0` with a `d^-eps` slack.
    EpsSlack,
}

/// The located regime and its exponents. `NotCovered` results keep the
/// exponent fields empty rather than reporting a number without support.
#[derive(Clone, Copy, Debug)]
pub struct RateResult {
    pub p: usize,
    pub case: RateCase,
    /// Optimal `l` in `lambda = d^-l` (exact rates only).
    pub lambda_exponent: Option<f64>,
    /// The `p = 0` schedule multiplies `d^(-gamma/2)` by `ln d`.
    pub lambda_ln_d_multiplier: bool,
    pub d_exponent: Option<f64>,
    pub n_exponent: Option<f64>,
    pub log_factor: LogFactor,
    pub s_tilde: f64,
}

impl RateResult {
    fn covered(
        q: &RegimeQuery,
        p: usize,
        case: RateCase,
        lambda_exponent: f64,
        lambda_ln_d_multiplier: bool,
        d_exponent: f64,
        log_factor: LogFactor,
        s_tilde: f64,
    ) -> Self {
        Self {
            p,
            case,
            lambda_exponent: match case {
                RateCase::MinimaxI | RateCase::MinimaxII => None,
                _ => Some(lambda_exponent),
            },
            lambda_ln_d_multiplier,
            d_exponent: Some(d_exponent),
            n_exponent: Some(d_exponent / q.gamma),
            log_factor,
            s_tilde,
        }
    }

    fn not_covered(s_tilde: f64) -> Self {
        Self {
            p: 0,
            case: RateCase::NotCovered,
            lambda_exponent: None,
            lambda_ln_d_multiplier: false,
            d_exponent: None,
            n_exponent: None,
            log_factor: LogFactor::None,
            s_tilde,
        }
    }
}

/// Index `p` with `gamma` in the left-open block `(p*width, (p+1)*width]`.
fn block_index(gamma: f64, width: f64) -> usize {
    let t = gamma / width;
    let p = t.ceil() - 1.0;
    if p < 0.0 {
        0
    } else {
        p as usize
    }
}

/// Exact generalization-error exponent of optimally regularized KRR at
/// `(gamma, s)`, with the optimal regularization schedule.
pub fn exact_rate(q: &RegimeQuery) -> RateResult {
    let gamma = q.gamma;
    let s: f64 = q.s;

    if s < 1.0 {
        // Below s = 1/2 the theory covers only gamma > 3s / (2(s+1)).
        if s <= 0.5 && gamma <= 3.0 * s / (2.0 * (s + 1.0)) {
            return RateResult::not_covered(s);
        }
        let p = block_index(gamma, 1.0 + s);
        let pf = p as f64;
        if gamma <= pf + pf * s + s {
            // Variance-dominated regime.
            let (l, ln_mult, log) = if p == 0 {
                (gamma / 2.0, true, LogFactor::Ln2N)
            } else {
                ((gamma + pf - pf * s) / 2.0, false, LogFactor::None)
            };
            RateResult::covered(q, p, RateCase::I, l, ln_mult, -gamma + pf, log, s)
        } else {
            // Bias-dominated plateau; lambda = d^(-(2p+s)/2).
            let l = (2.0 * pf + s) / 2.0;
            RateResult::covered(q, p, RateCase::III, l, false, -(pf + 1.0) * s, LogFactor::None, s)
        }
    } else {
        let st = s.min(2.0);
        let p = block_index(gamma, 1.0 + st);
        let pf = p as f64;
        let seam_1 = pf + pf * st + 1.0;
        let seam_2 = pf + pf * st + 2.0 * st - 1.0;
        if gamma <= seam_1 {
            let (l, ln_mult, log) = if p == 0 {
                (gamma / 2.0, true, LogFactor::Ln2N)
            } else {
                ((gamma + pf - pf * st) / 2.0, false, LogFactor::None)
            };
            RateResult::covered(q, p, RateCase::I, l, ln_mult, -gamma + pf, log, st)
        } else if gamma <= seam_2 {
            let l = (gamma + 3.0 * pf - pf * st + 1.0) / 4.0;
            let d_exp = -(gamma - pf + pf * st + 1.0) / 2.0;
            RateResult::covered(q, p, RateCase::II, l, false, d_exp, LogFactor::None, st)
        } else {
            let l = (gamma + (pf + 1.0) * (1.0 - st)) / 2.0;
            RateResult::covered(
                q,
                p,
                RateCase::III,
                l,
                false,
                -(pf + 1.0) * st,
                LogFactor::None,
                st,
            )
        }
    }
}

/// Minimax lower-bound exponent at `(gamma, s)`.
pub fn minimax_rate(q: &RegimeQuery) -> RateResult {
    let gamma = q.gamma;
    let s = q.s;
    let p = block_index(gamma, 1.0 + s);
    let pf = p as f64;
    if gamma <= pf + pf * s + s {
        RateResult::covered(q, p, RateCase::MinimaxI, 0.0, false, -gamma + pf, LogFactor::EpsSlack, s)
    } else {
        RateResult::covered(
            q,
            p,
            RateCase::MinimaxII,
            0.0,
            false,
            -(pf + 1.0) * s,
            LogFactor::None,
            s,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveSelection {
    Exact,
    Minimax,
    Both,
}

/// Which exponent axis a plotted curve reads off; both are always present
/// in the table, this only labels the intent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateAxis {
    D,
    N,
}

#[derive(Clone, Debug)]
pub struct RateCurveRow {
    pub gamma: f64,
    pub exact: Option<RateResult>,
    pub minimax: Option<RateResult>,
}

/// Evaluates the selected rate curves over a gamma grid. `NotCovered`
/// points are carried as rows with empty exponents, never dropped.
pub fn rate_curve(
    s: f64,
    gamma_grid: &[f64],
    which: CurveSelection,
) -> Result<Vec<RateCurveRow>, RateError> {
    let mut prev = 0.0;
    for &g in gamma_grid {
        if !(g > 0.0) || g <= prev {
            return Err(RateError::InvalidParameter { what: "gamma_grid", value: g });
        }
        prev = g;
    }
    gamma_grid
        .iter()
        .map(|&gamma| {
            let q = RegimeQuery::new(gamma, s)?;
            Ok(RateCurveRow {
                gamma,
                exact: matches!(which, CurveSelection::Exact | CurveSelection::Both)
                    .then(|| exact_rate(&q)),
                minimax: matches!(which, CurveSelection::Minimax | CurveSelection::Both)
                    .then(|| minimax_rate(&q)),
            })
        })
        .collect()
}
