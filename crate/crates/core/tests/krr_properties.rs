use anisokrr::covariance::CovarianceSpec;
use anisokrr::krr::{excess_risk_mc, fit, make_target, Dataset, HermiteKernel, KrrSolver, TargetFunction, TargetKind};
use anisokrr::spectral::KernelSpec;
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

fn hermite(xi: Vec<f64>, cov: &CovarianceSpec) -> HermiteKernel {
    HermiteKernel::new(&KernelSpec::hermite(xi).unwrap(), cov).unwrap()
}

fn column_variance(m: &Mat<f64>, j: usize) -> f64 {
    let n = m.nrows() as f64;
    let mean = (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>() / n;
    (0..m.nrows()).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn sample_moments() {
    let cov = CovarianceSpec::build(4, 0.8).unwrap();
    let data = Dataset::sample(100_000, &cov, 5).unwrap();
    for j in 0..4 {
        assert!((column_variance(&data.z, j) - 1.0).abs() < 0.02);
        // Var of the sample variance of a Gaussian is 2σ⁴/(n-1)
        let s = cov.sigma()[j];
        let se = s * (2.0 / 99_999.0f64).sqrt();
        assert!((column_variance(&data.x, j) - s).abs() < 3.0 * se);
        for i in 0..10 {
            assert!((data.x[(i, j)] / s.sqrt() - data.z[(i, j)]).abs() < 1e-15);
        }
    }
}

#[test]
fn kernel_matrix_symmetric_psd() {
    for &alpha in &[0.0, 0.6] {
        let cov = CovarianceSpec::build(20, alpha).unwrap();
        let z = Dataset::sample(200, &cov, 3).unwrap().z;
        let kernel = hermite(vec![1.0; 4], &cov);
        let raw = kernel.cross_matrix(&z, &z).unwrap();
        let k = kernel.matrix(&z).unwrap();
        let scale = k.norm_l2();
        for i in 0..200 {
            for j in 0..200 {
                assert!((raw[(i, j)] - raw[(j, i)]).abs() <= 1e-12 * scale);
            }
        }
        let eig = k.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let top = eig.last().copied().unwrap();
        assert!(eig[0] >= -1e-8 * top, "min eigenvalue {}", eig[0]);
    }
}

/// Primal ridge on X: w = (XᵀX + λI)⁻¹ Xᵀy.
fn linear_ridge(x: &Mat<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let d = x.ncols();
    let mut g = x.transpose() * x;
    for j in 0..d {
        g[(j, j)] += lambda;
    }
    let yv = Mat::<f64>::from_fn(y.len(), 1, |i, _| y[i]);
    let rhs = x.transpose() * &yv;
    let w = g.llt(Side::Lower).unwrap().solve(&rhs);
    (0..d).map(|j| w[(j, 0)]).collect()
}

#[test]
fn linear_kernel_is_linear_ridge() {
    let cov = CovarianceSpec::build(10, 0.5).unwrap();
    let target = make_target(&TargetKind::FirstCoord, &cov).unwrap();
    let data = Dataset::sample(50, &cov, 21).unwrap().label(&target, 0.1).unwrap();
    let model = fit(&data, &hermite(vec![0.0, 1.0], &cov), 0.05).unwrap();
    let w = linear_ridge(&data.x, &data.y, 0.05);
    let test = Dataset::sample(30, &cov, 22).unwrap();
    let pred = model.predict_many(&test.z).unwrap();
    for i in 0..30 {
        let x: Vec<f64> = (0..10).map(|j| test.x[(i, j)]).collect();
        let primal: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((pred[i] - primal).abs() < 1e-8);
        assert!((model.predict(&x).unwrap() - primal).abs() < 1e-8);
    }
}

#[test]
fn residual_and_interpolation() {
    let cov = CovarianceSpec::build(8, 0.3).unwrap();
    let target = make_target(&TargetKind::FirstCoord, &cov).unwrap();
    let data = Dataset::sample(50, &cov, 4).unwrap().label(&target, 0.5).unwrap();
    let model = fit(&data, &hermite(vec![1.0; 4], &cov), 0.01).unwrap();
    assert!(model.relative_residual <= 1e-10);
    let model = fit(&data, &hermite(vec![1.0; 4], &cov), 1e-8).unwrap();
    let fitted = model.predict_many(&data.z).unwrap();
    let err = fitted.iter().zip(&data.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 50.0;
    assert!(err <= 1e-4, "training error {err}");
}

#[test]
fn risk_examples() {
    let cov = CovarianceSpec::build(5, 0.5).unwrap();
    let constant = TargetFunction::new(5, vec![(1, 0, 2.0)]).unwrap();
    let data = Dataset::sample(10, &cov, 8).unwrap().label(&constant, 0.0).unwrap();
    let model = fit(&data, &hermite(vec![1.0, 1.0], &cov), 1e-9).unwrap();
    assert!(excess_risk_mc(&model, &constant, &cov, 500, 9).unwrap().mean <= 1e-6);

    let target = make_target(&TargetKind::FirstCoord, &cov).unwrap();
    let data = Dataset::sample(10, &cov, 8).unwrap().label(&target, 0.0).unwrap();
    let mut null = fit(&data, &hermite(vec![1.0; 4], &cov), 0.1).unwrap();
    null.coeffs.iter_mut().for_each(|a| *a = 0.0);
    let r = excess_risk_mc(&null, &target, &cov, 20_000, 3).unwrap();
    assert!((r.mean - 3.0).abs() < 4.0 * r.std_err, "{r:?}");

    let zero = make_target(&TargetKind::Custom(vec![]), &cov).unwrap();
    assert_eq!(excess_risk_mc(&null, &zero, &cov, 100, 3).unwrap().mean, 0.0);

    let model = fit(&data, &hermite(vec![1.0; 4], &cov), 0.1).unwrap();
    let a = excess_risk_mc(&model, &target, &cov, 5000, 1).unwrap();
    let b = excess_risk_mc(&model, &target, &cov, 5000, 2).unwrap();
    assert!((a.mean - b.mean).abs() <= 4.0 * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt());
}

#[test]
fn permutation_invariance() {
    let cov = CovarianceSpec::build(6, 0.4).unwrap();
    let target = make_target(&TargetKind::FirstCoord, &cov).unwrap();
    let data = Dataset::sample(40, &cov, 12).unwrap().label(&target, 0.2).unwrap();
    let perm: Vec<usize> = (0..40).map(|i| (i * 17 + 5) % 40).collect();
    let z = Mat::<f64>::from_fn(40, 6, |i, j| data.z[(perm[i], j)]);
    let y: Vec<f64> = perm.iter().map(|&i| data.y[i]).collect();
    let kernel = hermite(vec![1.0; 4], &cov);
    let a = KrrSolver::new(kernel.clone(), data.z.clone(), 0.01).unwrap().fit(&data.y).unwrap();
    let b = KrrSolver::new(kernel, z, 0.01).unwrap().fit(&y).unwrap();
    let ra = excess_risk_mc(&a, &target, &cov, 1000, 6).unwrap().mean;
    let rb = excess_risk_mc(&b, &target, &cov, 1000, 6).unwrap().mean;
    assert!((ra - rb).abs() <= 1e-9 * ra.max(1.0));
}
