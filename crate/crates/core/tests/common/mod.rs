//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use deepam::ipad::gaussian_matrix;
use deepam::linalg::normalize_rows;
use deepam::manifold::SubspaceBasis;
use deepam::patches::{extract_pairs, PatchDataset};
use deepam::scenes::scene_set;
use deepam::{AnalysisLayer, DeepAmModel, PatchGeometry};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian matrix with unit-norm rows.
pub fn unit_rows(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = gaussian_matrix(rows, cols, rng);
    normalize_rows(&mut m, 0.0);
    m
}

/// Random model over the default geometry with layer widths `widths`; the
/// first third of every layer is marked as IPAD and given smaller thresholds.
pub fn random_model(widths: &[usize], seed: u64) -> DeepAmModel {
    let geom = PatchGeometry::default();
    let mut rng = rng(seed);
    let mut d_in = geom.lr_dim();
    let mut layers = Vec::new();
    for &w in widths {
        let ipad = (w / 3).max(1);
        let omega = unit_rows(w, d_in, &mut rng);
        let lambda = (0..w)
            .map(|j| if j < ipad { rng.random_range(0.0..0.1) } else { rng.random_range(0.1..1.0) })
            .collect();
        layers.push(AnalysisLayer::new(omega, lambda, ipad).unwrap());
        d_in = w;
    }
    let synthesis = gaussian_matrix(geom.hr_dim(), d_in, &mut rng);
    DeepAmModel::new(layers, synthesis, geom, 0.0).unwrap()
}

/// Training pairs from procedural scenes.
pub fn scene_pairs(count: usize, side: usize, seed: u64, stride: usize) -> PatchDataset {
    let geom = PatchGeometry::default();
    let parts: Vec<PatchDataset> = scene_set(count, side, side, seed)
        .iter()
        .map(|img| extract_pairs(img, &geom, stride).unwrap())
        .collect();
    PatchDataset::concat(&parts).unwrap()
}

/// Relative Frobenius distance `‖a − b‖ / max(‖a‖, ‖b‖, tiny)`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Small single-batch training run for tests.
pub fn quick_config(arch: &str, iters: usize, seed: u64) -> deepam::train::TrainConfig {
    use deepam::train::{BatchSchedule, TrainConfig};
    TrainConfig {
        arch: arch.parse().unwrap(),
        schedule: BatchSchedule {
            iters_per_batch: iters,
            ..BatchSchedule::single_batch()
        },
        seed,
        ..TrainConfig::default()
    }
}

/// Mean squared error per entry between two equally shaped matrices.
pub fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}

/// Central-difference gradient of `f` at `x`, entry by entry.
pub fn numeric_gradient(x: &DMatrix<f64>, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let h = 1e-6;
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[(i, j)] += h;
        m[(i, j)] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

/// Orthonormal split of `R^n` into a random `k`-dimensional `W` and its
/// complement `U`.
pub fn random_basis(n: usize, k: usize, seed: u64) -> SubspaceBasis {
    let q = gaussian_matrix(n, n, &mut rng(seed)).qr().q();
    SubspaceBasis::from_parts(q.columns(0, k).into_owned(), q.columns(k, n - k).into_owned()).unwrap()
}

/// Ridge solution as plain least squares on the augmented system
/// `[Y 0] ≈ D [X I]`, solved by SVD.
pub fn augmented_ridge_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, n) = x.shape();
    let mut xa = DMatrix::zeros(d, n + d);
    xa.columns_mut(0, n).copy_from(x);
    xa.columns_mut(n, d).fill_with_identity();
    let mut ya = DMatrix::zeros(y.nrows(), n + d);
    ya.columns_mut(0, n).copy_from(y);
    // D Xa = Ya  <=>  Xaᵀ Dᵀ = Yaᵀ
    let svd = xa.transpose().svd(true, true);
    svd.solve(&ya.transpose(), 1e-14).unwrap().transpose()
}

/// Naive score for one `ρ`: elementwise shrinkage in loops, then least
/// squares on the non-zero feature rows through an SVD pseudo-inverse.
pub fn naive_threshold_score(responses: &DMatrix<f64>, base: &[f64], target: &DMatrix<f64>, rho: f64) -> f64 {
    let mut z = responses.clone();
    for i in 0..z.nrows() {
        let lam = rho * base[i];
        for j in 0..z.ncols() {
            let a = z[(i, j)];
            z[(i, j)] = if a > lam {
                a - lam
            } else if a < -lam {
                a + lam
            } else {
                0.0
            };
        }
    }
    let active: Vec<usize> = (0..z.nrows()).filter(|&i| z.row(i).iter().any(|v| *v != 0.0)).collect();
    if active.is_empty() {
        return target.norm_squared();
    }
    let za = z.select_rows(&active);
    // target ≈ G za  <=>  zaᵀ Gᵀ ≈ targetᵀ
    let g = za.transpose().svd(true, true).solve(&target.transpose(), 1e-13).unwrap().transpose();
    (target - g * za).norm_squared()
}

