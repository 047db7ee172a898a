//! Information-preserving analysis dictionaries and their small thresholds.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{optimize, GoalPlusConfig, ObjectiveSpec, OptimizeReport, SubspaceBasis};
use crate::thresholds::{search_threshold_scale, LaplacianStats, ThresholdSearch, ThresholdSearchGrid};

/// Default relative singular-value cut-off for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Signal subspace of `x` with rank `#{σ > rel_tol·σ_max}`.
pub fn compute_subspace(x: &DMatrix<f64>, rel_tol: f64) -> Result<SubspaceBasis> {
    if x.ncols() == 0 {
        return Err(Error::degenerate("no samples"));
    }
    SubspaceBasis::from_data(x, rel_tol)
}

/// I.i.d. standard normal `rows x cols` matrix.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Learns `atoms` IPAD atoms on layer input `x_prev` (`d_{i−1} x N`) with
/// the sparsity + log-det objective restricted to `basis`.
pub fn learn_ipad(
    x_prev: &DMatrix<f64>,
    atoms: usize,
    basis: &SubspaceBasis,
    config: &GoalPlusConfig,
    init: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, OptimizeReport)> {
    if atoms < basis.rank() {
        return Err(Error::degenerate(format!(
            "{atoms} IPAD atoms cannot span a rank-{} signal subspace",
            basis.rank()
        )));
    }
    if init.shape() != (atoms, x_prev.nrows()) {
        return Err(Error::dims(format!(
            "initial IPAD is {:?}, expected {:?}",
            init.shape(),
            (atoms, x_prev.nrows())
        )));
    }
    let objective = ObjectiveSpec {
        data: x_prev,
        nu: config.nu,
        basis,
        kappa: config.kappa,
        joint: None,
        mu: 0.0,
    };
    optimize(&objective, init, basis, config)
}

/// Picks `ρ` for thresholds `ρ/σ_j` minimizing the least-squares error of
/// predicting `y` from `S_{ρ/σ}(Ω_I x_prev)`.
pub fn search_rho_ipad(
    omega_ipad: &DMatrix<f64>,
    x_prev: &DMatrix<f64>,
    y: &DMatrix<f64>,
    stats: &LaplacianStats,
    grid: &ThresholdSearchGrid,
) -> Result<ThresholdSearch> {
    if stats.sigmas.len() != omega_ipad.nrows() {
        return Err(Error::dims("one scale estimate per IPAD atom required"));
    }
    let responses = linalg::mul(omega_ipad, x_prev);
    search_threshold_scale(&responses, &stats.inverse_scales(), y, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thresholds::estimate_sigmas;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_data() {
        let dir = [0.6, 0.0, 0.8];
        let x = DMatrix::from_fn(3, 10, |i, j| dir[i] * (j as f64 - 4.5));
        let b = compute_subspace(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.rank(), 1);
        let w = b.w.column(0);
        assert!((w[0].abs() - 0.6).abs() < 1e-12 && (w[2].abs() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_data_learns_spanning_atom() {
        let dir = [0.0, 0.8, -0.6];
        let x = DMatrix::from_fn(3, 40, |i, j| dir[i] * ((j * 7 % 11) as f64 - 5.0));
        let basis = compute_subspace(&x, DEFAULT_RANK_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = gaussian_matrix(1, 3, &mut rng);
        let cfg = GoalPlusConfig::ipad(3, 1).with_iters(20);
        let (omega, _) = learn_ipad(&x, 1, &basis, &cfg, &init).unwrap();
        let dot: f64 = (0..3).map(|k| omega[(0, k)] * dir[k]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_atoms_rejected() {
        let x = DMatrix::from_fn(3, 10, |i, j| ((i * 5 + j * 3) % 7) as f64);
        let basis = compute_subspace(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.rank(), 3);
        let init = DMatrix::from_element(2, 3, 1.0);
        let r = learn_ipad(&x, 2, &basis, &GoalPlusConfig::ipad(3, 2), &init);
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn noiseless_linear_target_prefers_smallest_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_matrix(4, 200, &mut rng);
        let map = gaussian_matrix(3, 4, &mut rng);
        let y = &map * &x;
        let omega = DMatrix::identity(4, 4);
        let stats = estimate_sigmas(&omega, &x).unwrap();
        let grid = ThresholdSearchGrid::default();
        let s = search_rho_ipad(&omega, &x, &y, &stats, &grid).unwrap();
        assert_eq!(s.rho, grid.values()[0]);
        assert!(s.scores.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12));
    }
}
