//! Orthogonal polynomials and Bessel functions backing the kernel eigensystems.
//!
//! Three polynomial families are supported: physicists' Hermite `H_k`,
//! probabilists' Hermite `He_k`, and generalized Laguerre `L_k^alpha`
//! (`alpha > -1`). All are evaluated by forward three-term recurrence, which
//! is stable in the degree and argument ranges the kernel eigensystems need
//! (geometric eigenvalue decay keeps the effective degree low).
//!
//! The modified Bessel function of the first kind `I_alpha` is evaluated by
//! its ascending series. A log-scaled variant is exposed so that products of
//! `exp(-c (x+y))` with `I_alpha` of a large argument can be formed without
//! overflow (arguments up to 1e4 and beyond).

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Maximum polynomial degree accepted by the evaluators.
///
/// Beyond this the per-level eigenvalue factors are far below double
/// underflow, so a larger cap would only invite recurrence blow-up.
pub const DEGREE_CAP: usize = 512;

/// One of the three supported orthogonal polynomial families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolynomialFamily {
    /// Physicists' Hermite `H_k`, weight `exp(-x^2)`.
    HermitePhysicists,
    /// Probabilists' Hermite `He_k`, weight `exp(-x^2/2)`.
    HermiteProbabilists,
    /// Generalized Laguerre `L_k^alpha`, weight `x^alpha exp(-x)`; requires
    /// `alpha > -1`.
    Laguerre { alpha: f64 },
}

impl PolynomialFamily {
    pub fn validate(&self) -> Result<(), SpecFunError> {
        if let PolynomialFamily::Laguerre { alpha } = self {
            if !alpha.is_finite() || *alpha <= -1.0 {
                return Err(SpecFunError::InvalidLaguerreAlpha { alpha: *alpha });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpecFunError {
    /// A real argument was NaN or infinite.
    NonFiniteArgument,
    /// Requested degree exceeds [`DEGREE_CAP`].
    DegreeAboveCap { k: usize, cap: usize },
    /// Laguerre order parameter out of range (`alpha <= -1`).
    InvalidLaguerreAlpha { alpha: f64 },
    /// Bessel function arguments must satisfy `alpha >= 0`, `z >= 0`.
    BesselDomain { alpha: f64, z: f64 },
}

impl core::fmt::Display for SpecFunError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpecFunError::NonFiniteArgument => write!(f, "argument must be finite"),
            SpecFunError::DegreeAboveCap { k, cap } => {
                write!(f, "degree {k} above the configured cap {cap}")
            }
            SpecFunError::InvalidLaguerreAlpha { alpha } => {
                write!(f, "Laguerre alpha must be > -1, got {alpha}")
            }
            SpecFunError::BesselDomain { alpha, z } => {
                write!(f, "bessel_i requires alpha >= 0 and z >= 0, got ({alpha}, {z})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpecFunError {}

fn check_degree(k: usize) -> Result<(), SpecFunError> {
    if k > DEGREE_CAP {
        Err(SpecFunError::DegreeAboveCap { k, cap: DEGREE_CAP })
    } else {
        Ok(())
    }
}

/// Evaluates the degree-`k` polynomial of `family` at `x` by forward
/// three-term recurrence. Exact for `k <= 1`.
pub fn eval_poly(family: PolynomialFamily, k: usize, x: f64) -> Result<f64, SpecFunError> {
    family.validate()?;
    if !x.is_finite() {
        return Err(SpecFunError::NonFiniteArgument);
    }
    check_degree(k)?;

    match family {
        PolynomialFamily::HermitePhysicists => Ok(recur(k, 1.0, 2.0 * x, |prev, prev2, j| {
            2.0 * x * prev - 2.0 * j * prev2
        })),
        PolynomialFamily::HermiteProbabilists => {
            Ok(recur(k, 1.0, x, |prev, prev2, j| x * prev - j * prev2))
        }
        PolynomialFamily::Laguerre { alpha } => {
            Ok(recur(k, 1.0, 1.0 + alpha - x, |prev, prev2, j| {
                ((2.0 * j + 1.0 + alpha - x) * prev - (j + alpha) * prev2) / (j + 1.0)
            }))
        }
    }
}

/// Evaluates the degree-`k` polynomial normalized to unit L2 norm under the
/// family's natural probability measure:
///
/// - physicists' Hermite: `H_k(x) / sqrt(2^k k!)` under `N(0, 1/2)`,
/// - probabilists' Hermite: `He_k(x) / sqrt(k!)` under `N(0, 1)`,
/// - Laguerre: `L_k^alpha(x) / sqrt(binom(k+alpha, k))` under `Gamma(alpha+1, 1)`.
///
/// The recurrence carries the normalization along, so values stay in range
/// for degrees where the raw polynomial (or the raw normalizer) would
/// overflow.
pub fn eval_orthonormal(family: PolynomialFamily, k: usize, x: f64) -> Result<f64, SpecFunError> {
    family.validate()?;
    if !x.is_finite() {
        return Err(SpecFunError::NonFiniteArgument);
    }
    check_degree(k)?;

    match family {
        PolynomialFamily::HermitePhysicists => {
            Ok(recur(k, 1.0, core::f64::consts::SQRT_2 * x, |prev, prev2, j| {
                x * (2.0 / (j + 1.0)).sqrt() * prev - (j / (j + 1.0)).sqrt() * prev2
            }))
        }
        PolynomialFamily::HermiteProbabilists => Ok(recur(k, 1.0, x, |prev, prev2, j| {
            (x * prev - j.sqrt() * prev2) / (j + 1.0).sqrt()
        })),
        PolynomialFamily::Laguerre { alpha } => Ok(recur(
            k,
            1.0,
            (1.0 + alpha - x) / (1.0 + alpha).sqrt(),
            |prev, prev2, j| {
                ((2.0 * j + 1.0 + alpha - x) * prev - (j * (j + alpha)).sqrt() * prev2)
                    / ((j + 1.0) * (j + alpha + 1.0)).sqrt()
            },
        )),
    }
}

/// Runs a three-term recurrence `p_{j+1} = step(p_j, p_{j-1}, j)` up to
/// degree `k`, starting from `p_0`, `p_1`.
fn recur(k: usize, p0: f64, p1: f64, step: impl Fn(f64, f64, f64) -> f64) -> f64 {
    match k {
        0 => p0,
        1 => p1,
        _ => {
            let (mut prev2, mut prev) = (p0, p1);
            for j in 1..k {
                let next = step(prev, prev2, j as f64);
                prev2 = prev;
                prev = next;
            }
            prev
        }
    }
}

/// Natural log of the Gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln( I_alpha(z) * (z/2)^(-alpha) )`, i.e. the log of the ascending series
/// `sum_m (z^2/4)^m / (m! Gamma(m+alpha+1))`.
///
/// The leading `(z/2)^alpha` power is factored out analytically, so the value
/// is finite down to `z = 0` (where it equals `-ln Gamma(alpha+1)`) and the
/// whole order range `alpha > -1` of the Laguerre eigensystem is admissible.
/// The series is summed with periodic rescaling, so arguments up to 1e4 and
/// beyond are handled without overflow.
pub fn ln_bessel_i_scaled(alpha: f64, z: f64) -> Result<f64, SpecFunError> {
    if !alpha.is_finite() || !z.is_finite() || alpha <= -1.0 || z < 0.0 {
        return Err(SpecFunError::BesselDomain { alpha, z });
    }

    let q = z * z / 4.0;
    let mut term = (-ln_gamma(alpha + 1.0)).exp();
    let mut sum = term;
    let mut ln_scale = 0.0;
    // Terms grow until m ~ z/2, then decay super-geometrically.
    let m_max = (z as usize) + 200;
    for m in 0..=m_max {
        let m = m as f64;
        term *= q / ((m + 1.0) * (m + alpha + 1.0));
        sum += term;
        if term <= sum * 1e-18 {
            break;
        }
        if sum > 1e280 {
            sum *= 1e-280;
            term *= 1e-280;
            ln_scale += 280.0 * core::f64::consts::LN_10;
        }
    }
    Ok(sum.ln() + ln_scale)
}

/// Modified Bessel function of the first kind `I_alpha(z)` for `alpha >= 0`,
/// `z >= 0`. May overflow to infinity for very large `z`; use
/// [`ln_bessel_i_scaled`] where products with decaying exponentials are
/// required.
pub fn bessel_i(alpha: f64, z: f64) -> Result<f64, SpecFunError> {
    if !alpha.is_finite() || !z.is_finite() || alpha < 0.0 || z < 0.0 {
        return Err(SpecFunError::BesselDomain { alpha, z });
    }
    if z == 0.0 {
        return Ok(if alpha == 0.0 { 1.0 } else { 0.0 });
    }
    let ln_scaled = ln_bessel_i_scaled(alpha, z)?;
    Ok((ln_scaled + alpha * (z / 2.0).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_base_cases() {
        // H_2(x) = 4x^2 - 2
        assert_eq!(eval_poly(PolynomialFamily::HermitePhysicists, 2, 1.0).unwrap(), 2.0);
        // He_3(x) = x^3 - 3x
        assert_eq!(eval_poly(PolynomialFamily::HermiteProbabilists, 3, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn laguerre_alpha_validation() {
        let bad = PolynomialFamily::Laguerre { alpha: -1.0 };
        assert!(matches!(
            eval_poly(bad, 1, 0.5),
            Err(SpecFunError::InvalidLaguerreAlpha { .. })
        ));
    }

    #[test]
    fn degree_cap_enforced() {
        assert!(matches!(
            eval_poly(PolynomialFamily::HermitePhysicists, DEGREE_CAP + 1, 0.0),
            Err(SpecFunError::DegreeAboveCap { .. })
        ));
        assert!(eval_poly(PolynomialFamily::HermitePhysicists, DEGREE_CAP, 0.0).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(eval_poly(PolynomialFamily::HermitePhysicists, 3, f64::NAN).is_err());
        assert!(bessel_i(0.0, f64::INFINITY).is_err());
        assert!(bessel_i(-0.5, 1.0).is_err());
    }

    #[test]
    fn bessel_at_zero() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i(0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn orthonormal_matches_raw_over_normalizer() {
        // Cross-check the carried normalization against the explicit one at
        // a degree where both are representable.
        let k = 12;
        let x = 1.3;
        let raw = eval_poly(PolynomialFamily::HermiteProbabilists, k, x).unwrap();
        let mut fact = 1.0;
        for j in 1..=k {
            fact *= j as f64;
        }
        let normalized = eval_orthonormal(PolynomialFamily::HermiteProbabilists, k, x).unwrap();
        assert!((normalized - raw / fact.sqrt()).abs() <= 1e-12 * normalized.abs());
    }

    #[test]
    fn orthonormal_stays_finite_at_cap() {
        let v = eval_orthonormal(PolynomialFamily::HermitePhysicists, DEGREE_CAP, 2.5).unwrap();
        assert!(v.is_finite());
    }
}
