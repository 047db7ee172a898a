//! Geometric conjugate-gradient learning of analysis dictionaries whose rows
//! are unit-norm and orthogonal to a forbidden subspace.

mod optimizer;
pub mod terms;

use nalgebra::{DMatrix, DVector};

pub use optimizer::{optimize, GoalPlusConfig, OptimizeReport, StopReason};
pub use terms::{
    grad_joint_sparsify, grad_logdet, grad_sparsify, term_joint_sparsify, term_logdet,
    term_sparsify, ObjectiveSpec, TermValues,
};

use crate::error::{Error, Result};
use crate::linalg;

/// Elementwise soft-thresholding `sgn(a)·max(|a| − λ, 0)`.
pub fn soft_threshold(a: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    if a.len() != lambda.len() {
        return Err(Error::dims(format!(
            "{} values, {} thresholds",
            a.len(),
            lambda.len()
        )));
    }
    if let Some(bad) = lambda.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::invalid(format!("negative threshold {bad}")));
    }
    Ok(a.iter().zip(lambda).map(|(&v, &l)| shrink(v, l)).collect())
}

#[inline]
pub fn shrink(v: f64, lambda: f64) -> f64 {
    let mag = v.abs() - lambda;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// Applies row `j`'s threshold `lambda[j]` to every entry of row `j`.
/// Thresholds are assumed validated (non-negative).
pub fn soft_threshold_rows(a: &mut DMatrix<f64>, lambda: &[f64]) {
    assert_eq!(a.nrows(), lambda.len(), "one threshold per row");
    let rows = a.nrows();
    for (k, v) in a.as_mut_slice().iter_mut().enumerate() {
        *v = shrink(*v, lambda[k % rows]);
    }
}

/// Orthonormal bases of a signal subspace `W` (`n x K`) and its complement
/// `U` (`n x (n−K)`).
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// Singular values of the data the basis was computed from, if any.
    pub singular_values: Option<DVector<f64>>,
}

impl SubspaceBasis {
    /// `W = I_n`, `U` empty.
    pub fn full(n: usize) -> Self {
        Self {
            w: DMatrix::identity(n, n),
            u: DMatrix::zeros(n, 0),
            singular_values: None,
        }
    }

    pub fn from_parts(w: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != u.nrows() || w.ncols() + u.ncols() != w.nrows() {
            return Err(Error::dims(format!(
                "basis blocks {:?} and {:?} do not split R^n",
                w.shape(),
                u.shape()
            )));
        }
        Ok(Self {
            w,
            u,
            singular_values: None,
        })
    }

    /// Leading `rank` left singular vectors of `x` as `W`, the rest as `U`.
    pub fn with_rank(x: &DMatrix<f64>, rank: usize) -> Result<Self> {
        let n = x.nrows();
        if rank == 0 || rank > n {
            return Err(Error::degenerate(format!(
                "signal subspace rank {rank} outside 1..={n}"
            )));
        }
        let (basis, sv) = linalg::left_singular_basis(x)?;
        Ok(Self {
            w: basis.columns(0, rank).into_owned(),
            u: basis.columns(rank, n - rank).into_owned(),
            singular_values: Some(sv),
        })
    }

    /// Numerical rank: singular values above `rel_tol·σ_max`.
    pub fn from_data(x: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let (basis, sv) = linalg::left_singular_basis(x)?;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return Err(Error::degenerate("all-zero data has no signal subspace"));
        }
        let rank = sv.iter().filter(|&&s| s > rel_tol * smax).count();
        let n = x.nrows();
        Ok(Self {
            w: basis.columns(0, rank).into_owned(),
            u: basis.columns(rank, n - rank).into_owned(),
            singular_values: Some(sv),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// Removes every row's component along `U` (row-wise `ω ← (I − U Uᵀ) ω`).
    pub fn project_rows_onto_signal(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.u.ncols() == 0 {
            return m.clone();
        }
        if self.rank() <= self.u.ncols() {
            linalg::mul_bt(&linalg::mul(m, &self.w), &self.w)
        } else {
            m - linalg::mul_bt(&linalg::mul(m, &self.u), &self.u)
        }
    }
}

/// Row-wise orthogonal projection of `g` onto the tangent space of the
/// feasible set at `omega`: each row is made orthogonal to its own atom and
/// to every column of `U` (`P_ω = I − Q_ω†Q_ω`, `Q_ω = [2ω, U]ᵀ`).
pub fn tangent_project(g: &DMatrix<f64>, omega: &DMatrix<f64>, basis: &SubspaceBasis) -> DMatrix<f64> {
    assert_eq!(g.shape(), omega.shape(), "gradient and dictionary shapes differ");
    let mut out = basis.project_rows_onto_signal(g);
    let atoms = basis.project_rows_onto_signal(omega);
    for i in 0..out.nrows() {
        let a = atoms.row(i);
        let nn = a.norm_squared();
        if nn <= f64::EPSILON * f64::EPSILON {
            continue;
        }
        let coef = out.row(i).dot(&a) / nn;
        let a = a.into_owned();
        let mut row = out.row_mut(i);
        row -= a * coef;
    }
    out
}

/// Dense `n x n` tangent projector for a single atom, `I − Q_ω†Q_ω`.
pub fn tangent_projector(omega_row: &DVector<f64>, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    let n = basis.dim();
    if omega_row.len() != n {
        return Err(Error::dims("atom length differs from basis dimension"));
    }
    let mut q = DMatrix::zeros(1 + basis.u.ncols(), n);
    q.row_mut(0).copy_from(&(omega_row * 2.0).transpose());
    for k in 0..basis.u.ncols() {
        q.row_mut(k + 1).copy_from(&basis.u.column(k).transpose());
    }
    let qpinv = linalg::pseudo_inverse(&q, 1e-12)?;
    Ok(DMatrix::identity(n, n) - qpinv * q)
}
