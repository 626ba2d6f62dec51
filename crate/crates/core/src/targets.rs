//! Synthetic regression targets that are exactly evaluable through the
//! kernel: sums of kernel sections (inside the RKHS), single product
//! eigenfunctions (arbitrarily smooth), and explicit eigen-coefficient
//! combinations on small instances.

use alloc::vec::Vec;

use rand::Rng;

use crate::kernels::{KernelError, ProductKernel};
use crate::spectrum::{multiplicity, ENUMERATION_BUDGET};

#[derive(Clone, Debug, PartialEq)]
pub enum TargetError {
    Kernel(KernelError),
    /// Eigenfunction index exceeds the level multiplicity.
    IndexOutOfLevel { level: usize, index: u128, multiplicity: u128 },
    /// Coefficient targets require exact-enumeration-sized levels.
    BudgetExceeded { level: usize },
    InvalidParameter { what: &'static str },
}

impl From<KernelError> for TargetError {
    fn from(e: KernelError) -> Self {
        TargetError::Kernel(e)
    }
}

impl core::fmt::Display for TargetError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TargetError::Kernel(e) => write!(f, "{e}"),
            TargetError::IndexOutOfLevel { level, index, multiplicity } => write!(
                f,
                "eigenfunction index {index} out of range for level {level} \
                 (multiplicity {multiplicity})"
            ),
            TargetError::BudgetExceeded { level } => {
                write!(f, "level {level} too large for an explicit coefficient target")
            }
            TargetError::InvalidParameter { what } => write!(f, "invalid target parameter {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TargetError {}

/// Construction recipe for [`make_target`].
#[derive(Clone, Debug, PartialEq)]
pub enum TargetKind {
    /// `f(x) = sum_i k_d(x, x_i)` with `count` anchors drawn from the
    /// product measure.
    KernelSections { count: usize },
    /// A single product eigenfunction, addressed by staircase level and
    /// index within the level (index 0 puts the full degree on the first
    /// coordinate).
    Eigenfunction { level: usize, index: u128 },
}

#[derive(Clone, Debug)]
enum Payload {
    KernelSections { anchors: Vec<Vec<f64>> },
    Eigenfunction { level: usize, index: u128, multi_index: Vec<usize> },
    Coefficient { entries: Vec<(Vec<usize>, f64)> },
}

/// An exactly evaluable regression target tied to its product kernel.
#[derive(Clone, Debug)]
pub struct TargetSpec {
    kernel: ProductKernel,
    payload: Payload,
}

/// Builds a target from a [`TargetKind`]; anchors for kernel-section
/// targets are drawn from the product measure using `rng`.
pub fn make_target<R: Rng + ?Sized>(
    kernel: &ProductKernel,
    kind: &TargetKind,
    rng: &mut R,
) -> Result<TargetSpec, TargetError> {
    match kind {
        TargetKind::KernelSections { count } => {
            let anchors = (0..*count).map(|_| kernel.sample_input(rng)).collect();
            TargetSpec::kernel_sections(kernel, anchors)
        }
        TargetKind::Eigenfunction { level, index } => {
            TargetSpec::eigenfunction(kernel, *level, *index)
        }
    }
}

impl TargetSpec {
    pub fn kernel_sections(
        kernel: &ProductKernel,
        anchors: Vec<Vec<f64>>,
    ) -> Result<Self, TargetError> {
        if anchors.is_empty() {
            return Err(TargetError::InvalidParameter { what: "anchors (empty)" });
        }
        for a in &anchors {
            if a.len() != kernel.d() {
                return Err(TargetError::Kernel(KernelError::LengthMismatch {
                    expected: kernel.d(),
                    got: a.len(),
                }));
            }
        }
        Ok(Self {
            kernel: kernel.clone(),
            payload: Payload::KernelSections { anchors },
        })
    }

    pub fn eigenfunction(
        kernel: &ProductKernel,
        level: usize,
        index: u128,
    ) -> Result<Self, TargetError> {
        let mult = multiplicity(kernel.d(), level)
            .ok_or(TargetError::IndexOutOfLevel { level, index, multiplicity: u128::MAX })?;
        if index >= mult {
            return Err(TargetError::IndexOutOfLevel { level, index, multiplicity: mult });
        }
        let multi_index = unrank_multi_index(kernel.d(), level, index);
        Ok(Self {
            kernel: kernel.clone(),
            payload: Payload::Eigenfunction { level, index, multi_index },
        })
    }

    /// Explicit eigen-coefficient target `f = sum f_alpha e_alpha`; only
    /// meaningful on instances small enough to enumerate.
    pub fn coefficient_target(
        kernel: &ProductKernel,
        entries: Vec<(Vec<usize>, f64)>,
    ) -> Result<Self, TargetError> {
        if entries.is_empty() {
            return Err(TargetError::InvalidParameter { what: "entries (empty)" });
        }
        for (alpha, _) in &entries {
            if alpha.len() != kernel.d() {
                return Err(TargetError::Kernel(KernelError::LengthMismatch {
                    expected: kernel.d(),
                    got: alpha.len(),
                }));
            }
            let level = alpha.iter().sum::<usize>();
            let within =
                multiplicity(kernel.d(), level).map_or(false, |m| m <= ENUMERATION_BUDGET);
            if !within {
                return Err(TargetError::BudgetExceeded { level });
            }
        }
        Ok(Self { kernel: kernel.clone(), payload: Payload::Coefficient { entries } })
    }

    pub fn kernel(&self) -> &ProductKernel {
        &self.kernel
    }

    pub fn anchors(&self) -> Option<&[Vec<f64>]> {
        match &self.payload {
            Payload::KernelSections { anchors } => Some(anchors),
            _ => None,
        }
    }

    pub fn multi_index(&self) -> Option<&[usize]> {
        match &self.payload {
            Payload::Eigenfunction { multi_index, .. } => Some(multi_index),
            _ => None,
        }
    }

    /// `(level, index)` address of an eigenfunction target.
    pub fn eigenfunction_address(&self) -> Option<(usize, u128)> {
        match &self.payload {
            Payload::Eigenfunction { level, index, .. } => Some((*level, *index)),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, TargetError> {
        match &self.payload {
            Payload::KernelSections { anchors } => {
                let mut total = 0.0;
                for anchor in anchors {
                    total += self.kernel.eval(x, anchor)?;
                }
                Ok(total)
            }
            Payload::Eigenfunction { multi_index, .. } => {
                Ok(self.eval_product_eigenfunction(multi_index, x)?)
            }
            Payload::Coefficient { entries } => {
                let mut total = 0.0;
                for (alpha, coeff) in entries {
                    total += coeff * self.eval_product_eigenfunction(alpha, x)?;
                }
                Ok(total)
            }
        }
    }

    fn eval_product_eigenfunction(
        &self,
        alpha: &[usize],
        x: &[f64],
    ) -> Result<f64, KernelError> {
        if x.len() != self.kernel.d() {
            return Err(KernelError::LengthMismatch { expected: self.kernel.d(), got: x.len() });
        }
        let mut prod = 1.0;
        for ((factor, &a), &xi) in self.kernel.factors().iter().zip(alpha).zip(x) {
            prod *= factor.eigenfunction(a, xi)?;
        }
        Ok(prod)
    }

    /// Squared interpolation-space norm `|f|^2_{[H]^s}` where it has a
    /// closed form: `mu_alpha^-s` for a single eigenfunction,
    /// `sum mu_alpha^-s f_alpha^2` for coefficient targets.
    pub fn source_norm_sq(&self, s: f64) -> Option<f64> {
        match &self.payload {
            Payload::KernelSections { .. } => None,
            Payload::Eigenfunction { multi_index, .. } => {
                Some(self.eigenvalue_of(multi_index).powf(-s))
            }
            Payload::Coefficient { entries } => Some(
                entries
                    .iter()
                    .map(|(alpha, f)| self.eigenvalue_of(alpha).powf(-s) * f * f)
                    .sum(),
            ),
        }
    }

    /// Product eigenvalue of the target's own multi-index (eigenfunction /
    /// coefficient payloads).
    fn eigenvalue_of(&self, alpha: &[usize]) -> f64 {
        self.kernel
            .factors()
            .iter()
            .zip(alpha)
            .map(|(factor, &a)| factor.eigenvalue(a))
            .product()
    }

    /// Per-level coefficient masses `m_k = sum mu^-s f^2` up to `k_max`,
    /// for wiring targets into the spectral functionals.
    pub fn level_masses(&self, s: f64, k_max: usize) -> Option<Vec<f64>> {
        match &self.payload {
            Payload::KernelSections { .. } => None,
            Payload::Eigenfunction { multi_index, level, .. } => {
                let mut masses = alloc::vec![0.0; k_max + 1];
                if *level <= k_max {
                    masses[*level] = self.eigenvalue_of(multi_index).powf(-s);
                }
                Some(masses)
            }
            Payload::Coefficient { entries } => {
                let mut masses = alloc::vec![0.0; k_max + 1];
                for (alpha, f) in entries {
                    let level: usize = alpha.iter().sum();
                    if level <= k_max {
                        masses[level] += self.eigenvalue_of(alpha).powf(-s) * f * f;
                    }
                }
                Some(masses)
            }
        }
    }

}

/// Multi-index of total degree `level` at position `index` in the canonical
/// order that spends degree on leading coordinates first:
/// index 0 is `(level, 0, ..., 0)`.
fn unrank_multi_index(d: usize, level: usize, mut index: u128) -> Vec<usize> {
    let mut alpha = Vec::with_capacity(d);
    let mut remaining = level;
    for i in 0..d {
        if i == d - 1 {
            alpha.push(remaining);
            break;
        }
        let rest = d - i - 1;
        let mut chosen = 0;
        for a in (0..=remaining).rev() {
            let completions = multiplicity(rest, remaining - a).expect("within budget");
            if index < completions {
                chosen = a;
                break;
            }
            index -= completions;
        }
        alpha.push(chosen);
        remaining -= chosen;
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BaseKernelKind;
    use alloc::vec;
    use rand::SeedableRng;

    fn mehler_kernel(d: usize) -> ProductKernel {
        ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, d).unwrap()
    }

    #[test]
    fn unranking_orders_leading_coordinates_first() {
        assert_eq!(unrank_multi_index(3, 1, 0), vec![1, 0, 0]);
        assert_eq!(unrank_multi_index(3, 1, 1), vec![0, 1, 0]);
        assert_eq!(unrank_multi_index(3, 1, 2), vec![0, 0, 1]);
        assert_eq!(unrank_multi_index(3, 2, 0), vec![2, 0, 0]);
        assert_eq!(unrank_multi_index(3, 2, 1), vec![1, 1, 0]);
        // All level-2 indices over d=3 are distinct and sum to 2.
        let mut seen = vec![];
        for i in 0..multiplicity(3, 2).unwrap() {
            let a = unrank_multi_index(3, 2, i);
            assert_eq!(a.iter().sum::<usize>(), 2);
            assert!(!seen.contains(&a));
            seen.push(a);
        }
    }

    #[test]
    fn level_zero_eigenfunction_of_mehler_is_constant_one() {
        let pk = mehler_kernel(4);
        let t = TargetSpec::eigenfunction(&pk, 0, 0).unwrap();
        for x in [vec![0.0; 4], vec![1.0, -2.0, 0.3, 0.9]] {
            assert_eq!(t.evaluate(&x).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_anchor_section_hits_diagonal_value() {
        let pk = ProductKernel::uniform(
            BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 1.0 },
            3,
        )
        .unwrap();
        let anchor = vec![0.4, -1.0, 2.0];
        let t = TargetSpec::kernel_sections(&pk, vec![anchor.clone()]).unwrap();
        assert_eq!(t.evaluate(&anchor).unwrap(), 1.0);
    }

    #[test]
    fn eigenfunction_index_bounds_are_checked() {
        let pk = mehler_kernel(3);
        assert!(TargetSpec::eigenfunction(&pk, 1, 2).is_ok());
        assert!(matches!(
            TargetSpec::eigenfunction(&pk, 1, 3),
            Err(TargetError::IndexOutOfLevel { .. })
        ));
    }

    #[test]
    fn eigenfunction_source_norm_is_inverse_eigenvalue_power() {
        let pk = mehler_kernel(2); // r = 0.5
        let t = TargetSpec::eigenfunction(&pk, 2, 0).unwrap();
        let mu: f64 = 0.25; // r^2
        for s in [0.5, 1.0, 2.0] {
            let got = t.source_norm_sq(s).unwrap();
            assert!((got - mu.powf(-s)).abs() < 1e-12 * mu.powf(-s));
        }
        let masses = t.level_masses(1.0, 4).unwrap();
        assert_eq!(masses.len(), 5);
        assert!((masses[2] - 4.0).abs() < 1e-12);
        assert_eq!(masses[0], 0.0);
    }

    #[test]
    fn drawn_anchors_are_recorded_and_deterministic() {
        let pk = mehler_kernel(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = make_target(&pk, &TargetKind::KernelSections { count: 3 }, &mut rng).unwrap();
        let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t2 = make_target(&pk, &TargetKind::KernelSections { count: 3 }, &mut rng2).unwrap();
        assert_eq!(t.anchors().unwrap(), t2.anchors().unwrap());
        assert_eq!(t.anchors().unwrap().len(), 3);
    }

    #[test]
    fn coefficient_target_matches_manual_combination() {
        let pk = mehler_kernel(2);
        let t = TargetSpec::coefficient_target(
            &pk,
            vec![(vec![0, 0], 0.5), (vec![1, 0], 2.0), (vec![1, 1], -1.0)],
        )
        .unwrap();
        let x = [0.7, -0.2];
        // Probabilists' Hermite: e_0 = 1, e_1(x) = x.
        let expected = 0.5 + 2.0 * 0.7 + (-1.0) * 0.7 * (-0.2);
        assert!((t.evaluate(&x).unwrap() - expected).abs() < 1e-14);
    }
}
