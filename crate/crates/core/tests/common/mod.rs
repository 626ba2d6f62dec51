//! Shared oracles for the integration tests. Everything here is independent
//! of the library's own evaluation paths: quadrature nodes come from Newton
//! iteration on the recurrence written out locally, eigenvalues from plain
//! Jacobi rotations, and linear solves from partially pivoted elimination.

#![allow(dead_code)]

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)` on the real
/// line: `int f(x) exp(-x^2) dx ~ sum w_i f(x_i)`.
///
/// Positive roots of the degree-`n` Hermite polynomial are bracketed by sign
/// changes on a fine grid inside the oscillatory region `[0, sqrt(2n+1)]`,
/// then bisected to convergence. The orthonormal recurrence keeps degree 200
/// in floating-point range.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    let upper = ((2 * n + 1) as f64).sqrt() + 0.5;
    // Minimum root spacing is ~ pi / sqrt(2n+1); step well below that.
    let step = 1.0 / ((2 * n + 1) as f64).sqrt();
    let value = |x: f64| hermite_orthonormal_pair(n, x).0;

    let mut found = Vec::new();
    let mut x0 = if n % 2 == 1 {
        found.push(0.0);
        step / 2.0
    } else {
        0.0
    };
    let mut f0 = value(x0);
    while found.len() < (n + 1) / 2 && x0 < upper {
        let x1 = x0 + step;
        let f1 = value(x1);
        if f0 == 0.0 {
            found.push(x0);
        } else if f0.signum() != f1.signum() {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = value(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            found.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    assert_eq!(found.len(), (n + 1) / 2, "missed Gauss-Hermite roots");

    for (i, &z) in found.iter().rev().enumerate() {
        // w = 2 / pp^2 with pp the derivative of the orthonormal polynomial.
        let pp = hermite_orthonormal_pair(n, z).1;
        let w = 2.0 / (pp * pp);
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Returns `(htilde_n(x), htilde_n'(x))` for the Hermite polynomials
/// orthonormal under `exp(-x^2) dx`.
fn hermite_orthonormal_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev2 = 0.0;
    let mut prev = core::f64::consts::PI.powf(-0.25);
    for j in 0..n {
        let j = j as f64;
        let next = x * (2.0 / (j + 1.0)).sqrt() * prev - (j / (j + 1.0)).sqrt() * prev2;
        prev2 = prev;
        prev = next;
    }
    // d/dx htilde_n = sqrt(2n) htilde_{n-1}
    (prev, (2.0 * n as f64).sqrt() * prev2)
}

/// Gauss–Laguerre nodes and weights for the probability measure
/// `Gamma(alpha+1, 1)`: `E[f] ~ sum w_i f(x_i)` with `sum w_i = 1`.
///
/// Nodes are the bracketed roots of the orthonormal Laguerre polynomial of
/// degree `n`; weights are the Christoffel numbers `1 / sum_{k<n} p_k(x)^2`.
pub fn gauss_laguerre_measure(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let value = |x: f64| laguerre_orthonormal_all(n, alpha, x)[n];
    let upper = 4.0 * n as f64 + 2.0 * alpha + 6.0;
    let step = 0.5 / n as f64;

    let mut nodes = Vec::with_capacity(n);
    let mut x0 = 1e-12;
    let mut f0 = value(x0);
    while nodes.len() < n && x0 < upper {
        let x1 = x0 + step;
        let f1 = value(x1);
        if f0.signum() != f1.signum() {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = value(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    assert_eq!(nodes.len(), n, "missed Gauss-Laguerre roots");

    let weights = nodes
        .iter()
        .map(|&x| {
            let p = laguerre_orthonormal_all(n, alpha, x);
            1.0 / p[..n].iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// Values `p_0(x) ... p_n(x)` of the Laguerre polynomials orthonormal under
/// the `Gamma(alpha+1, 1)` probability measure.
fn laguerre_orthonormal_all(n: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push((1.0 + alpha - x) / (1.0 + alpha).sqrt());
    for k in 1..n {
        let j = k as f64;
        let next = ((2.0 * j + 1.0 + alpha - x) * out[k]
            - (j * (j + alpha)).sqrt() * out[k - 1])
            / ((j + 1.0) * (j + alpha + 1.0)).sqrt();
        out.push(next);
    }
    out
}

/// Expectation of `f` under `Gamma(alpha+1, 1)`.
pub fn gamma_expectation(n: usize, alpha: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_laguerre_measure(n, alpha);
    nodes.iter().zip(&weights).map(|(&x, &w)| w * f(x)).sum()
}

/// Expectation of `f` under `N(mean, sd^2)` by Gauss–Hermite quadrature.
pub fn gauss_expectation(n: usize, mean: f64, sd: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let c = core::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| w * f(mean + core::f64::consts::SQRT_2 * sd * t) / c)
        .sum()
}

/// Eigenvalues of a dense symmetric matrix (row-major, `n x n`) via cyclic
/// Jacobi rotations. Returned unsorted.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[idx(i, i)]).collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n` and is consumed.
pub fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        assert!(d != 0.0, "singular matrix in lu_solve");
        for row in (col + 1)..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col * n + col];
        for row in 0..col {
            b[row] -= a[row * n + col] * b[col];
        }
    }
    b
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn quadrature_integrates_gaussian_moments() {
        // int x^2 dN(0,1) = 1, int x^4 dN(0,1) = 3
        let m2 = gauss_expectation(200, 0.0, 1.0, |x| x * x);
        let m4 = gauss_expectation(200, 0.0, 1.0, |x| x.powi(4));
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn quadrature_integrates_gamma_moments() {
        // Gamma(alpha+1, 1): mean alpha+1, second moment (a+1)(a+2).
        for &alpha in &[0.0, 0.5, 2.0] {
            let m1 = gamma_expectation(24, alpha, |x| x);
            let m2 = gamma_expectation(24, alpha, |x| x * x);
            assert!((m1 - (alpha + 1.0)).abs() < 1e-10, "alpha={alpha}: m1={m1}");
            assert!((m2 - (alpha + 1.0) * (alpha + 2.0)).abs() < 1e-9, "alpha={alpha}: m2={m2}");
        }
    }
}
