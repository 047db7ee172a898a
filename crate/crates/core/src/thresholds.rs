//! Per-atom scale estimates and the one-dimensional grid search that picks a
//! global threshold scaling `ρ` by least-squares prediction error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::soft_threshold_rows;

/// Below this mean absolute response an atom is considered dead.
pub const DEAD_ATOM_SIGMA: f64 = 1e-12;

/// Ordered set of candidate scalings `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchGrid {
    rho_values: Vec<f64>,
}

impl ThresholdSearchGrid {
    pub fn new(rho_values: Vec<f64>) -> Result<Self> {
        if rho_values.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        if rho_values.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid("threshold grid values must be positive and finite"));
        }
        if rho_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("threshold grid must be strictly increasing"));
        }
        Ok(Self { rho_values })
    }

    /// `{1, 2, …, 9} × 10^e` for `e` in `min_exp..=max_exp`.
    pub fn decades(min_exp: i32, max_exp: i32) -> Result<Self> {
        if min_exp > max_exp {
            return Err(Error::invalid(format!("empty exponent range {min_exp}..={max_exp}")));
        }
        let mut v = Vec::new();
        for e in min_exp..=max_exp {
            let base = 10f64.powi(e);
            for k in 1..=9 {
                v.push(k as f64 * base);
            }
        }
        Self::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.rho_values
    }
}

impl Default for ThresholdSearchGrid {
    fn default() -> Self {
        Self::decades(-4, 1).expect("static grid is valid")
    }
}

/// Laplacian scale of each atom's response, estimated by its mean absolute
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianStats {
    pub sigmas: Vec<f64>,
    /// Atoms whose responses vanish on the data.
    pub dead: Vec<usize>,
}

impl LaplacianStats {
    fn is_dead(&self, j: usize) -> bool {
        self.sigmas[j] < DEAD_ATOM_SIGMA
    }

    /// `1/σ_j`, with dead atoms mapped to 0.
    pub fn inverse_scales(&self) -> Vec<f64> {
        (0..self.sigmas.len())
            .map(|j| if self.is_dead(j) { 0.0 } else { 1.0 / self.sigmas[j] })
            .collect()
    }

    /// `σ_j`, with dead atoms mapped to 0.
    pub fn scales(&self) -> Vec<f64> {
        (0..self.sigmas.len())
            .map(|j| if self.is_dead(j) { 0.0 } else { self.sigmas[j] })
            .collect()
    }
}

pub fn estimate_sigmas(omega: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<LaplacianStats> {
    if omega.ncols() != x.nrows() {
        return Err(Error::dims(format!(
            "dictionary has {} columns, data {} rows",
            omega.ncols(),
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::degenerate("no samples to estimate response scales"));
    }
    Ok(stats_from_responses(&linalg::mul(omega, x)))
}

pub(crate) fn stats_from_responses(a: &DMatrix<f64>) -> LaplacianStats {
    let n = a.ncols() as f64;
    let sigmas: Vec<f64> = (0..a.nrows())
        .map(|j| a.row(j).iter().map(|v| v.abs()).sum::<f64>() / n)
        .collect();
    let dead = sigmas
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < DEAD_ATOM_SIGMA)
        .map(|(j, _)| j)
        .collect();
    LaplacianStats { sigmas, dead }
}

/// Outcome of a threshold-scaling search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub rho: f64,
    /// Deployed thresholds `ρ·base`.
    pub lambda: Vec<f64>,
    /// `‖T − G Z‖²_F` at `rho`.
    pub score: f64,
    /// `(ρ, score)` for every grid value.
    pub scores: Vec<(f64, f64)>,
    /// Fraction of samples with a non-zero coefficient, per atom, at `rho`.
    pub survivor_fractions: Vec<f64>,
}

/// Least-squares fit of `target ≈ G z` for thresholded features `z`.
#[derive(Debug, Clone)]
pub struct FeatureFit {
    /// `target_dim x d` map; columns of all-zero features are zero.
    pub map: DMatrix<f64>,
    pub score: f64,
    /// Whether the ridge fallback was needed.
    pub regularized: bool,
}

/// Fits `G = T Zᵀ (Z Zᵀ)⁻¹` over the non-zero rows of `z` and reports the
/// squared Frobenius residual. If every row is zero, `G = 0`. A ridge of
/// `1e-8·trace/d` is added when `Z Zᵀ` is numerically singular.
pub fn fit_features(z: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<FeatureFit> {
    if z.ncols() != target.ncols() {
        return Err(Error::dims("features and targets differ in sample count"));
    }
    let active: Vec<usize> = (0..z.nrows())
        .filter(|&j| z.row(j).iter().any(|v| *v != 0.0))
        .collect();
    let mut map = DMatrix::zeros(target.nrows(), z.nrows());
    if active.is_empty() {
        return Ok(FeatureFit {
            map,
            score: target.norm_squared(),
            regularized: false,
        });
    }
    let za = z.select_rows(&active);
    let mut gram = linalg::mul_bt(&za, &za);
    let rhs = linalg::mul_bt(&za, target); // d x T, so G_aᵀ = C⁻¹ rhs

    let well_conditioned = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        let diag = c.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        lo > 0.0 && (lo / hi).powi(2) > 1e-13
    };
    let mut regularized = false;
    let chol = match gram.clone().cholesky() {
        Some(c) if well_conditioned(&c) => c,
        _ => {
            regularized = true;
            let eps = 1e-8 * gram.trace() / active.len() as f64;
            for i in 0..gram.nrows() {
                gram[(i, i)] += eps;
            }
            gram.cholesky()
                .ok_or_else(|| Error::Numerical("feature Gram matrix is not positive definite".into()))?
        }
    };
    let ga = chol.solve(&rhs).transpose();
    let mut resid = target.clone();
    resid -= linalg::mul(&ga, &za);
    for (k, &j) in active.iter().enumerate() {
        map.set_column(j, &ga.column(k));
    }
    Ok(FeatureFit {
        map,
        score: resid.norm_squared(),
        regularized,
    })
}

fn survivors(z: &DMatrix<f64>) -> Vec<f64> {
    let n = z.ncols().max(1) as f64;
    (0..z.nrows())
        .map(|j| z.row(j).iter().filter(|v| **v != 0.0).count() as f64 / n)
        .collect()
}

/// Searches `ρ` over `grid` for thresholds `ρ·base` applied to `responses`
/// (`d x N`), scoring each by the least-squares residual on `target`.
/// The smallest `ρ` wins ties.
pub fn search_threshold_scale(
    responses: &DMatrix<f64>,
    base: &[f64],
    target: &DMatrix<f64>,
    grid: &ThresholdSearchGrid,
) -> Result<ThresholdSearch> {
    if responses.nrows() != base.len() {
        return Err(Error::dims("one base threshold per atom required"));
    }
    if responses.ncols() != target.ncols() {
        return Err(Error::dims("responses and targets differ in sample count"));
    }
    if base.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::invalid("base thresholds must be non-negative"));
    }
    let mut scores = Vec::with_capacity(grid.values().len());
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut any_nonzero = false;
    for &rho in grid.values() {
        let lambda: Vec<f64> = base.iter().map(|b| rho * b).collect();
        let mut z = responses.clone();
        soft_threshold_rows(&mut z, &lambda);
        any_nonzero |= z.iter().any(|v| *v != 0.0);
        let fit = fit_features(&z, target)?;
        scores.push((rho, fit.score));
        if best.as_ref().is_none_or(|(_, s, _)| fit.score < *s) {
            best = Some((rho, fit.score, survivors(&z)));
        }
    }
    if !any_nonzero {
        return Err(Error::degenerate(
            "every threshold scaling zeroes all coefficients",
        ));
    }
    let (rho, score, survivor_fractions) = best.expect("grid is non-empty");
    Ok(ThresholdSearch {
        rho,
        lambda: base.iter().map(|b| rho * b).collect(),
        score,
        scores,
        survivor_fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_six_decades() {
        let g = ThresholdSearchGrid::default();
        assert_eq!(g.values().len(), 54);
        assert!((g.values()[0] - 1e-4).abs() < 1e-20);
        assert!((g.values()[53] - 90.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(ThresholdSearchGrid::new(vec![]).is_err());
        assert!(ThresholdSearchGrid::new(vec![0.1, 0.1]).is_err());
        assert!(ThresholdSearchGrid::new(vec![0.0, 0.1]).is_err());
        assert!(ThresholdSearchGrid::decades(2, 1).is_err());
    }

    #[test]
    fn dead_atom_flagged() {
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, -2.0, 0.0, 3.0, 0.0]);
        let stats = estimate_sigmas(&omega, &x).unwrap();
        assert_eq!(stats.dead, vec![1]);
        assert_eq!(stats.inverse_scales()[1], 0.0);
        assert!((stats.sigmas[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_magnitude_responses() {
        let omega = DMatrix::from_row_slice(1, 1, &[1.0]);
        let x = DMatrix::from_row_slice(1, 4, &[0.7, -0.7, 0.7, -0.7]);
        let stats = estimate_sigmas(&omega, &x).unwrap();
        assert!((stats.sigmas[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_features_give_zero_map() {
        let z = DMatrix::zeros(3, 5);
        let t = DMatrix::from_fn(2, 5, |i, j| (i + j) as f64);
        let fit = fit_features(&z, &t).unwrap();
        assert_eq!(fit.map, DMatrix::zeros(2, 3));
        assert_eq!(fit.score, t.norm_squared());
    }

    #[test]
    fn all_zero_everywhere_is_an_error() {
        let a = DMatrix::zeros(2, 4);
        let t = DMatrix::from_element(1, 4, 1.0);
        assert!(search_threshold_scale(&a, &[1.0, 1.0], &t, &ThresholdSearchGrid::default()).is_err());
    }
}
