//! Analytic gradients of the dictionary-learning terms against central
//! finite differences, and the log-det value against an eigenvalue oracle.

mod common;

use common::{numeric_gradient, random_basis, rel_err, rng, unit_rows};
use deepam::ipad::gaussian_matrix;
use deepam::manifold::{
    grad_joint_sparsify, grad_logdet, grad_sparsify, term_joint_sparsify, term_logdet, term_sparsify, ObjectiveSpec,
    SubspaceBasis,
};
use nalgebra::DMatrix;
use rand::Rng;

const INSTANCES: u64 = 25;
const TOL: f64 = 1e-5;

#[test]
fn sparsify_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut r = rng(seed);
        let (m, n, samples) = (r.random_range(2..7), r.random_range(2..6), r.random_range(5..30));
        let omega = unit_rows(m, n, &mut r);
        let x = gaussian_matrix(n, samples, &mut r) * 0.2;
        let nu = [1.0, 10.0, 100.0 * n as f64][seed as usize % 3];
        let analytic = grad_sparsify(&omega, &x, nu);
        let numeric = numeric_gradient(&omega, |o| term_sparsify(o, &x, nu));
        let err = rel_err(&analytic, &numeric);
        assert!(err <= TOL, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn logdet_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut r = rng(100 + seed);
        let n = r.random_range(3..7);
        let k = r.random_range(1..=n);
        // Both the tall (m >= K) and the wide (m < K) Gram branches.
        let m = if seed % 2 == 0 { r.random_range(k..k + 4) } else { r.random_range(1..=k) };
        let basis = random_basis(n, k, seed);
        let omega = unit_rows(m, n, &mut r);
        let analytic = grad_logdet(&omega, &basis).unwrap();
        let numeric = numeric_gradient(&omega, |o| term_logdet(o, &basis).unwrap());
        let err = rel_err(&analytic, &numeric);
        assert!(err <= TOL, "instance {seed} (m={m}, n={n}, K={k}): relative error {err:e}");
    }
}

#[test]
fn joint_sparsify_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut r = rng(200 + seed);
        let (m, n, samples) = (r.random_range(1..6), r.random_range(2..8), r.random_range(5..25));
        let psi = unit_rows(m, n, &mut r);
        let ymid = gaussian_matrix(n, samples, &mut r) * 0.3;
        let e = gaussian_matrix(n, samples, &mut r) * 0.1;
        let nu = [1.0, 50.0, 100.0 * n as f64][seed as usize % 3];
        let analytic = grad_joint_sparsify(&psi, &ymid, &e, nu);
        let numeric = numeric_gradient(&psi, |p| term_joint_sparsify(p, &ymid, &e, nu));
        let err = rel_err(&analytic, &numeric);
        assert!(err <= TOL, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn composite_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut r = rng(300 + seed);
        let n = r.random_range(3..6);
        let k = r.random_range(1..=n);
        let m = r.random_range(k..k + 3);
        let basis = random_basis(n, k, 300 + seed);
        let x = gaussian_matrix(n, 20, &mut r) * 0.3;
        let e = gaussian_matrix(n, 20, &mut r) * 0.1;
        let spec = ObjectiveSpec {
            data: &x,
            nu: 20.0,
            basis: &basis,
            kappa: 0.7,
            joint: Some((&x, &e)),
            mu: 3.0,
        };
        let omega = unit_rows(m, n, &mut r);
        let (value, analytic) = spec.value_and_gradient(&omega).unwrap();
        assert_eq!(value, spec.value(&omega));
        let numeric = numeric_gradient(&omega, |o| spec.value(o));
        let err = rel_err(&analytic, &numeric);
        assert!(err <= TOL, "instance {seed}: relative error {err:e}");
    }
}

/// `h = −1/(K log K) · Σ log eig(1/m · Wᵀ Ωᵀ Ω W)` by symmetric
/// eigendecomposition, independent of the Cholesky path.
fn logdet_oracle(omega: &DMatrix<f64>, basis: &SubspaceBasis) -> f64 {
    let m = omega.nrows() as f64;
    let ow = omega * &basis.w;
    let gram = ow.transpose() * &ow / m;
    let k = basis.w.ncols() as f64;
    let sum_log: f64 = gram.symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum();
    -sum_log / (k * k.ln())
}

#[test]
fn logdet_value_matches_eigenvalue_oracle() {
    for seed in 0..INSTANCES {
        let mut r = rng(400 + seed);
        let n = r.random_range(2..8);
        let k = r.random_range(2..=n);
        let m = r.random_range(k..k + 5);
        let basis = random_basis(n, k, 400 + seed);
        let omega = unit_rows(m, n, &mut r);
        let got = term_logdet(&omega, &basis).unwrap();
        let want = logdet_oracle(&omega, &basis);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "instance {seed}: {got} vs {want}");
    }
}

#[test]
fn logdet_is_infinite_on_rank_deficient_atoms() {
    let basis = SubspaceBasis::full(3);
    let omega = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    assert!(term_logdet(&omega, &basis).is_none());
    assert!(grad_logdet(&omega, &basis).is_err());
}
