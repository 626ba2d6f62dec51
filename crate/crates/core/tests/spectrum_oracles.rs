//! Brute-force multi-index oracles for the spectral functionals, the
//! staircase sandwich, multiplicity growth, and the asymptotic envelopes.

mod common;

use krrlab_core::kernels::{BaseKernel1D, BaseKernelKind, ProductKernel};
use krrlab_core::spectrum::{
    asymptotic_functionals, multiplicity, CheckOptions, CoefficientSpec, SpectrumModel,
    SpectrumMode,
};

/// Sums `term(mu_alpha)` over every multi-index with `|alpha| <= k_max`,
/// walking the index space directly; independent of the level-grouping done
/// by `SpectrumModel`.
fn brute_force_sum(pk: &ProductKernel, k_max: usize, term: &dyn Fn(f64) -> f64) -> f64 {
    fn go(
        factors: &[BaseKernel1D],
        budget: usize,
        prod: f64,
        term: &dyn Fn(f64) -> f64,
        acc: &mut f64,
    ) {
        if factors.is_empty() {
            *acc += term(prod);
            return;
        }
        for j in 0..=budget {
            go(&factors[1..], budget - j, prod * factors[0].eigenvalue(j), term, acc);
        }
    }
    // Fix the total degree per outer call so truncation matches the model's
    // level cutoff exactly.
    let mut total = 0.0;
    for k in 0..=k_max {
        fn go_exact(
            factors: &[BaseKernel1D],
            remaining: usize,
            prod: f64,
            term: &dyn Fn(f64) -> f64,
            acc: &mut f64,
        ) {
            if factors.len() == 1 {
                *acc += term(prod * factors[0].eigenvalue(remaining));
                return;
            }
            for j in 0..=remaining {
                go_exact(&factors[1..], remaining - j, prod * factors[0].eigenvalue(j), term, acc);
            }
        }
        let mut acc = 0.0;
        go_exact(pk.factors(), k, 1.0, term, &mut acc);
        total += acc;
    }
    let _ = go; // the unconstrained walker is kept for clarity of intent
    total
}

fn test_instances() -> Vec<ProductKernel> {
    let mut out = Vec::new();
    for d in 1..=4usize {
        out.push(
            ProductKernel::uniform(BaseKernelKind::Mehler { theta: 0.4, sigma: 1.0 }, d).unwrap(),
        );
        out.push(
            ProductKernel::uniform(
                BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 0.8 },
                d,
            )
            .unwrap(),
        );
        out.push(
            ProductKernel::uniform(BaseKernelKind::Laguerre { theta: 0.7, alpha: 0.5 }, d)
                .unwrap(),
        );
    }
    // Heterogeneous: one factor of each kind.
    out.push(
        ProductKernel::from_factors(vec![
            BaseKernel1D::new(BaseKernelKind::Mehler { theta: 0.5, sigma: 1.0 }, 3).unwrap(),
            BaseKernel1D::new(BaseKernelKind::GaussianOnGaussian { ell: 1.2, sigma: 1.0 }, 3)
                .unwrap(),
            BaseKernel1D::new(BaseKernelKind::Laguerre { theta: 1.1, alpha: 1.0 }, 3).unwrap(),
        ])
        .unwrap(),
    );
    out
}

#[test]
fn functionals_match_brute_force_on_exact_instances() {
    let lambdas = [1e-4, 1e-3, 1e-2, 0.1, 1.0];
    for pk in test_instances() {
        let k_max = 6;
        let sp = SpectrumModel::build_exact(&pk, k_max).unwrap();
        for &lambda in &lambdas {
            let n1 = sp.n1(lambda).unwrap().value;
            let n1_expect = brute_force_sum(&pk, k_max, &|mu| mu / (mu + lambda));
            assert!(
                (n1 - n1_expect).abs() <= 1e-9 * n1_expect,
                "n1 d={} lambda={lambda}: {n1} vs {n1_expect}",
                pk.d()
            );
            let n2 = sp.n2(lambda).unwrap().value;
            let n2_expect = brute_force_sum(&pk, k_max, &|mu| (mu / (mu + lambda)).powi(2));
            assert!(
                (n2 - n2_expect).abs() <= 1e-9 * n2_expect,
                "n2 d={} lambda={lambda}: {n2} vs {n2_expect}",
                pk.d()
            );
        }
    }
}

#[test]
fn uniform_fast_path_agrees_with_exact_enumeration() {
    for d in [2usize, 3, 4] {
        let pk =
            ProductKernel::uniform(BaseKernelKind::Mehler { theta: 0.6, sigma: 1.0 }, d).unwrap();
        let fast = SpectrumModel::build(&pk, 6).unwrap();
        let exact = SpectrumModel::build_exact(&pk, 6).unwrap();
        assert_eq!(fast.mode(), SpectrumMode::UniformFactorFastPath);
        assert_eq!(exact.mode(), SpectrumMode::ExactEnumeration);
        for &lambda in &[1e-3, 0.05, 0.7] {
            let a = fast.n1(lambda).unwrap().value;
            let b = exact.n1(lambda).unwrap().value;
            assert!((a - b).abs() <= 1e-11 * b, "d={d} lambda={lambda}: {a} vs {b}");
            let a = fast.n2(lambda).unwrap().value;
            let b = exact.n2(lambda).unwrap().value;
            assert!((a - b).abs() <= 1e-11 * b, "d={d} lambda={lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn mehler_d2_example_against_double_sum() {
    // d = 2 identical Mehler factors with r = 0.1, k_max = 6, lambda = 0.01.
    let pk = ProductKernel::uniform(BaseKernelKind::Mehler { theta: 0.2, sigma: 1.0 }, 2).unwrap();
    let sp = SpectrumModel::build(&pk, 6).unwrap();
    let lambda = 0.01;
    let mut expect_n1 = 0.0;
    let mut expect_n2 = 0.0;
    for a in 0..=6usize {
        for b in 0..=6usize {
            if a + b > 6 {
                continue;
            }
            let mu = 0.1f64.powi(a as i32) * 0.1f64.powi(b as i32);
            expect_n1 += mu / (mu + lambda);
            expect_n2 += (mu / (mu + lambda)).powi(2);
        }
    }
    assert!((sp.n1(lambda).unwrap().value - expect_n1).abs() <= 1e-9 * expect_n1);
    assert!((sp.n2(lambda).unwrap().value - expect_n2).abs() <= 1e-9 * expect_n2);
}

#[test]
fn r2_level_masses_match_expanded_per_index_sum() {
    // Identical factors: expanding the level mass into N(d,k) equal
    // per-index coefficients reproduces the same sum exactly.
    let pk = ProductKernel::uniform(BaseKernelKind::Mehler { theta: 0.4, sigma: 1.0 }, 3).unwrap();
    let sp = SpectrumModel::build_exact(&pk, 5).unwrap();
    let s = 1.3;
    let masses = vec![0.2, 0.5, 0.1, 0.05, 0.02, 0.01];
    let coeffs = CoefficientSpec::new(masses.clone(), s, 1.0).unwrap();

    for &lambda in &[1e-3, 0.02, 0.4] {
        let got = sp.r2(&coeffs, lambda).unwrap();
        let mut expect = 0.0;
        for (k, level) in sp.levels().iter().enumerate() {
            let n_k = level.exact_multiplicity().unwrap() as f64;
            for &mu in level.explicit_eigenvalues().unwrap() {
                // Equal share of the level mass on every index: the squared
                // coefficient is mu^s * m_k / N(d,k).
                let f_sq = mu.powf(s) * masses[k] / n_k;
                expect += (lambda / (mu + lambda)).powi(2) * f_sq;
            }
        }
        assert!(
            (got - expect).abs() <= 1e-12 * expect.max(1e-300),
            "lambda={lambda}: {got} vs {expect}"
        );
    }
}

#[test]
fn staircase_sandwich_for_default_kernels() {
    // Level-k eigenvalues within [c1 d^-k, c2 d^-k], constants shared across
    // levels k <= 4; multiplicities exactly binomial.
    for d in [10usize, 30, 100] {
        for pk in [
            ProductKernel::uniform(BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 1.0 }, d)
                .unwrap(),
            ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, d).unwrap(),
            ProductKernel::uniform(BaseKernelKind::Laguerre { theta: 1.0, alpha: 0.5 }, d)
                .unwrap(),
        ] {
            let sp = SpectrumModel::build(&pk, 4).unwrap();
            let (c1, c2) = sp.staircase_constants();
            assert!(c1 > 0.0 && c2 / c1 < 50.0, "constants spread too wide: {c1}, {c2}");
            for level in sp.levels() {
                let k = level.k();
                let lo = c1 * (d as f64).powi(-(k as i32));
                let hi = c2 * (d as f64).powi(-(k as i32));
                assert!(level.min_eigenvalue() >= lo * (1.0 - 1e-12));
                assert!(level.max_eigenvalue() <= hi * (1.0 + 1e-12));
                assert_eq!(level.exact_multiplicity(), multiplicity(d, k));
                let expect_mult = multiplicity(d, k).unwrap();
                assert_eq!(expect_mult, binom_oracle(k + d - 1, d - 1));
            }
        }
    }
}

#[test]
fn staircase_sandwich_for_heterogeneous_factors() {
    // Per-factor parameter spread keeps within-level eigenvalues Theta-equal.
    let d = 10usize;
    let factors: Vec<BaseKernel1D> = (0..d)
        .map(|i| {
            let theta = 0.8 + 0.05 * i as f64;
            BaseKernel1D::new(BaseKernelKind::Mehler { theta, sigma: 1.0 }, d).unwrap()
        })
        .collect();
    let pk = ProductKernel::from_factors(factors).unwrap();
    let sp = SpectrumModel::build(&pk, 4).unwrap();
    assert_eq!(sp.mode(), SpectrumMode::ExactEnumeration);
    let (c1, c2) = sp.staircase_constants();
    assert!(c1 > 0.0 && c2 / c1 < 50.0);
    for level in sp.levels() {
        assert_eq!(level.exact_multiplicity(), multiplicity(d, level.k()));
    }
}

/// Exact binomial via Pascal recursion on u128, independent of the library's
/// product formula.
fn binom_oracle(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut row = vec![1u128; k + 1];
    for _ in 0..(n - k) {
        for j in 1..=k {
            row[j] += row[j - 1];
        }
    }
    row[k]
}

#[test]
fn multiplicity_growth_matches_stirling_band() {
    // N(d,k) / d^k in [1/k!, 2/k!] for fixed k <= 4 once d >= 50.
    for d in [50usize, 100, 200, 500] {
        let mut factorial = 1.0;
        for k in 0..=4usize {
            if k > 0 {
                factorial *= k as f64;
            }
            let ratio = multiplicity(d, k).unwrap() as f64 / (d as f64).powi(k as i32);
            assert!(
                ratio >= 1.0 / factorial - 1e-12 && ratio <= 2.0 / factorial,
                "d={d} k={k}: ratio {ratio}"
            );
        }
    }
}

#[test]
fn functional_monotonicity_on_lambda_grid() {
    let pk = ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, 30).unwrap();
    let sp = SpectrumModel::build(&pk, 12).unwrap();
    let coeffs = CoefficientSpec::uniform(13, 1.0, 1.0).unwrap();

    let lambdas: Vec<f64> = (0..30).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / 29.0)).collect();
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for &lambda in &lambdas {
        let n1 = sp.n1(lambda).unwrap().value;
        let n2 = sp.n2(lambda).unwrap().value;
        let r2 = sp.r2(&coeffs, lambda).unwrap();
        let flam = sp.f_lambda_sup_bound(&coeffs, lambda, 1.0).unwrap();
        assert!(n2 <= n1 * (1.0 + 1e-12), "ordering at lambda={lambda}");
        if let Some((p1, p2, pr, pf)) = prev {
            assert!(n1 < p1, "n1 not strictly decreasing at {lambda}");
            assert!(n2 < p2, "n2 not strictly decreasing at {lambda}");
            assert!(r2 >= pr * (1.0 - 1e-12), "r2 decreased at {lambda}");
            assert!(flam <= pf * (1.0 + 1e-12), "flam increased at {lambda}");
        }
        prev = Some((n1, n2, r2, flam));
    }
}

#[test]
fn tail_estimate_covers_truncation_error() {
    let pk = ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, 25).unwrap();
    let short = SpectrumModel::build(&pk, 5).unwrap();
    let long = SpectrumModel::build(&pk, 14).unwrap();
    for &lambda in &[1e-4, 1e-3, 1e-2] {
        let a = short.n1(lambda).unwrap();
        let b = long.n1(lambda).unwrap();
        let missing = b.value - a.value;
        assert!(missing >= 0.0);
        // The geometric extrapolation should account for the missing mass
        // within a factor of two.
        assert!(
            a.tail_estimate >= 0.5 * missing && a.tail_estimate <= 2.0 * (missing + b.tail_estimate).max(1e-300),
            "lambda={lambda}: tail {0} vs missing {missing}",
            a.tail_estimate
        );
    }
}

#[test]
fn n2_matches_asymptotic_scale_within_constant() {
    // Enumerated N2 over the asymptotic scale stays in [1/20, 20] for
    // d in {20, 40, 80} at l = 1.2.
    for &d in &[20usize, 40, 80] {
        let pk =
            ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, d).unwrap();
        let sp = SpectrumModel::build(&pk, 20).unwrap();
        let lambda = (d as f64).powf(-1.2);
        let n2 = sp.n2(lambda).unwrap().value;
        let scale = asymptotic_functionals(d, 1.2, 1.0).n2_scale;
        let ratio = n2 / scale;
        assert!((0.05..=20.0).contains(&ratio), "d={d}: ratio {ratio}");
    }
}

#[test]
fn f_lambda_bound_matches_envelope_within_factor_ten() {
    // s = 0.6, l = 1.2, unit level masses.
    let s = 0.6;
    for &d in &[20usize, 40, 80] {
        let pk =
            ProductKernel::uniform(BaseKernelKind::Mehler { theta: 1.0, sigma: 1.0 }, d).unwrap();
        let sp = SpectrumModel::build(&pk, 20).unwrap();
        let coeffs = CoefficientSpec::uniform(21, 1.0, s).unwrap();
        let lambda = (d as f64).powf(-1.2);
        let bound = sp.f_lambda_sup_bound(&coeffs, lambda, 1.0).unwrap();
        let envelope = asymptotic_functionals(d, 1.2, s).flam_scale;
        let ratio = bound / envelope;
        assert!((0.1..=10.0).contains(&ratio), "d={d}: ratio {ratio}");
    }
}

#[test]
fn condition_report_snapshot_for_reference_instance() {
    // d = 30, n = ceil(d^1.5), lambda = d^-0.75, s = 1 on the default
    // Gaussian kernel; values recorded as a regression baseline.
    let d = 30usize;
    let n = (30f64).powf(1.5).ceil() as usize;
    let lambda = (d as f64).powf(-0.75);
    let pk = ProductKernel::uniform(BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 1.0 }, d)
        .unwrap();
    let sp = SpectrumModel::build(&pk, 12).unwrap();
    let coeffs = CoefficientSpec::uniform(13, 1.0, 1.0).unwrap();
    let report =
        sp.check_conditions(&coeffs, n, lambda, 1.0, 0.05, &CheckOptions::default()).unwrap();

    assert!(report.n1.is_finite() && report.n2.is_finite() && report.r2.is_finite());
    assert!(report.f_lambda_bound.is_finite());
    for entry in &report.entries {
        assert!(entry.small.is_finite() && entry.large.is_finite(), "{}", entry.name);
    }
    // Frozen regression values (see test output when updating deliberately).
    insta_like(report.n1, 8.078_116_871_972_632_4, "n1");
    insta_like(report.n2, 1.240_088_024_881_854_2, "n2");
    insta_like(report.r2, 2.035_172_948_526_896e-2, "r2");
    insta_like(report.f_lambda_bound, 8.423_845_282_961_189e-1, "flam");
}

fn insta_like(actual: f64, frozen: f64, what: &str) {
    assert!(
        (actual - frozen).abs() <= 1e-9 * frozen.abs().max(1.0),
        "{what}: {actual} drifted from frozen {frozen}"
    );
}
