//! Clustering analysis dictionaries: learned in the HR domain against the
//! residual of a per-layer linear predictor, then mapped back onto the layer
//! input through that predictor.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{optimize, soft_threshold_rows, GoalPlusConfig, ObjectiveSpec, OptimizeReport, SubspaceBasis};
use crate::thresholds::{fit_features, search_threshold_scale, LaplacianStats, ThresholdSearch, ThresholdSearchGrid};

/// Ridge predictor from layer input to HR targets, the mid-resolution
/// prediction and its residual.
#[derive(Debug, Clone)]
pub struct LayerSynthesis {
    /// `d_{L+1} x d_{i−1}`.
    pub map: DMatrix<f64>,
    pub ymid: DMatrix<f64>,
    pub residual: DMatrix<f64>,
}

/// `D = Y Xᵀ (X Xᵀ + I)⁻¹`, `Y_mid = D X`, `E = Y − Y_mid`.
pub fn layer_synthesis(x_prev: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LayerSynthesis> {
    let map = linalg::ridge_least_squares(x_prev, y)?;
    let ymid = linalg::mul(&map, x_prev);
    let residual = y - &ymid;
    Ok(LayerSynthesis { map, ymid, residual })
}

/// Learns `Ψ` (`d_C x d_{L+1}`) jointly sparsifying `Y_mid` and `E`, with
/// the log-det term on `y_basis` (signal subspace of the HR targets).
pub fn learn_psi(
    synthesis: &LayerSynthesis,
    y_basis: &SubspaceBasis,
    config: &GoalPlusConfig,
    init: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, OptimizeReport)> {
    let d_hr = synthesis.ymid.nrows();
    if init.nrows() == 0 || init.ncols() != d_hr {
        return Err(Error::dims(format!(
            "initial Psi is {:?}, expected d_C x {d_hr}",
            init.shape()
        )));
    }
    let objective = ObjectiveSpec {
        data: &synthesis.ymid,
        nu: config.nu,
        basis: y_basis,
        kappa: config.kappa,
        joint: Some((&synthesis.ymid, &synthesis.residual)),
        mu: config.mu,
    };
    optimize(&objective, init, y_basis, config)
}

/// `Ω_C = Ψ D` with rows renormalized. Rows with (near) zero norm — atoms
/// orthogonal to the range of `D` — are dropped and their indices returned.
pub fn reparam_cad(psi: &DMatrix<f64>, map: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if psi.ncols() != map.nrows() {
        return Err(Error::dims(format!(
            "Psi has {} columns, synthesis map {} rows",
            psi.ncols(),
            map.nrows()
        )));
    }
    let raw = linalg::mul(psi, map);
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut omega = raw;
    let dropped = linalg::normalize_rows(&mut omega, 1e-12 * scale);
    if dropped.len() == omega.nrows() {
        return Err(Error::degenerate("every CAD atom vanishes after re-parameterization"));
    }
    if !dropped.is_empty() {
        warn!("dropping {} CAD atoms orthogonal to the synthesis range", dropped.len());
        let keep: Vec<usize> = (0..omega.nrows()).filter(|r| !dropped.contains(r)).collect();
        omega = omega.select_rows(&keep);
    }
    Ok((omega, dropped))
}

/// HR residual left after predicting `y` from the thresholded IPAD features
/// by least squares: `Y_R = Y − G_I·S_{λ_I}(Ω_I X)`.
pub fn ipad_residual(
    omega_ipad: &DMatrix<f64>,
    lambda_ipad: &[f64],
    x_prev: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if lambda_ipad.len() != omega_ipad.nrows() {
        return Err(Error::dims("one threshold per IPAD atom required"));
    }
    if lambda_ipad.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::invalid("thresholds must be non-negative"));
    }
    let mut z = linalg::mul(omega_ipad, x_prev);
    soft_threshold_rows(&mut z, lambda_ipad);
    let fit = fit_features(&z, y)?;
    Ok(y - linalg::mul(&fit.map, &z))
}

/// Picks `ρ` for thresholds `ρ·σ_j` minimizing the least-squares error of
/// predicting the IPAD residual from `S_{ρσ}(Ω_C x_prev)`.
pub fn search_rho_cad(
    omega_cad: &DMatrix<f64>,
    x_prev: &DMatrix<f64>,
    residual: &DMatrix<f64>,
    stats: &LaplacianStats,
    grid: &ThresholdSearchGrid,
) -> Result<ThresholdSearch> {
    if stats.sigmas.len() != omega_cad.nrows() {
        return Err(Error::dims("one scale estimate per CAD atom required"));
    }
    let responses = linalg::mul(omega_cad, x_prev);
    search_threshold_scale(&responses, &stats.scales(), residual, grid)
}
