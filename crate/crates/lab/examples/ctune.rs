use krrlab_core::kernels::{BaseKernelKind, ProductKernel};
use krrlab_core::spectrum::{CoefficientSpec, SpectrumModel};

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    sxy / sxx
}

fn main() {
    let ds = [20usize, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
    let sigma_sq = 0.01;
    let k_max = 25;

    // Preset (a): kernel-sections target, s = 1, l = 0.75.
    // Level masses m_k ~ 3 mu_k N(d,k) (anchor cross-terms vanish in mean).
    println!("preset (a):");
    for &c in &[0.2, 0.3, 0.4, 0.5, 0.7, 1.0] {
        let mut pts = Vec::new();
        for &d in &ds[2..] {
            let pk = ProductKernel::uniform(
                BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 1.0 }, d).unwrap();
            let sp = SpectrumModel::build(&pk, k_max).unwrap();
            let n = (d as f64).powf(1.5).ceil();
            let lambda = c * (d as f64).powf(-0.75);
            let masses: Vec<f64> = sp.levels().iter().map(|level| {
                let mult = (level.ln_multiplicity()).exp();
                3.0 * level.representative() * mult
            }).collect();
            let r1 = masses.iter().sum::<f64>().sqrt() * 1.001;
            let coeffs = CoefficientSpec::new(masses, 1.0, r1).unwrap();
            let r2 = sp.r2(&coeffs, lambda).unwrap();
            let n2 = sp.n2(lambda).unwrap().value;
            pts.push(((d as f64).ln(), (r2 + sigma_sq * n2 / n).ln()));
        }
        println!("  C={c}: theory slope {:.3}", ols_slope(&pts));
    }

    println!("preset (b): level-0 eigenfunction, l = 0.625");
    for &c in &[0.15, 0.2, 0.25, 0.3, 0.4] {
        let mut pts = Vec::new();
        for &d in &ds[2..] {
            let pk = ProductKernel::uniform(
                BaseKernelKind::GaussianOnGaussian { ell: 1.0, sigma: 1.0 }, d).unwrap();
            let sp = SpectrumModel::build(&pk, k_max).unwrap();
            let n = (d as f64).powf(1.5).ceil();
            let lambda = c * (d as f64).powf(-0.625);
            let n2 = sp.n2(lambda).unwrap().value;
            let mu0 = sp.levels()[0].representative();
            let bias = (lambda / (mu0 + lambda)).powi(2);
            pts.push(((d as f64).ln(), (bias + sigma_sq * n2 / n).ln()));
        }
        println!("  C={c}: theory slope {:.3}", ols_slope(&pts));
    }
}
