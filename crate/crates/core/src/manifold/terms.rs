//! Objective terms over analysis dictionaries and their Euclidean gradients.
//!
//! All dictionaries are `m x n` with one atom per row; data matrices are
//! `n x N` with one sample per column.

use nalgebra::DMatrix;

use super::SubspaceBasis;
use crate::error::{Error, Result};
use crate::linalg;

/// Log-square sparsity penalty
/// `g(Ω) = 1/(N·m·log(1+ν)) · Σ log(1 + ν (ω_jᵀ x_i)²)`.
pub fn term_sparsify(omega: &DMatrix<f64>, x: &DMatrix<f64>, nu: f64) -> f64 {
    let a = linalg::mul(omega, x);
    sparsify_from_responses(&a, nu)
}

fn sparsify_norm(m: usize, n_samples: usize, nu: f64) -> f64 {
    1.0 / (n_samples as f64 * m as f64 * nu.ln_1p())
}

fn sparsify_from_responses(a: &DMatrix<f64>, nu: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let c = sparsify_norm(a.nrows(), a.ncols(), nu);
    c * a.iter().map(|&v| (nu * v * v).ln_1p()).sum::<f64>()
}

pub fn grad_sparsify(omega: &DMatrix<f64>, x: &DMatrix<f64>, nu: f64) -> DMatrix<f64> {
    let a = linalg::mul(omega, x);
    grad_sparsify_from_responses(a, x, nu)
}

fn grad_sparsify_from_responses(mut a: DMatrix<f64>, x: &DMatrix<f64>, nu: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.nrows(), x.nrows());
    }
    let c = sparsify_norm(a.nrows(), a.ncols(), nu);
    a.apply(|v| *v = c * 2.0 * nu * *v / (1.0 + nu * *v * *v));
    linalg::mul_bt(&a, x)
}

/// Value of the log-det term; `None` when the Gram matrix on the signal
/// subspace is singular (the term is `+∞` there).
///
/// `h(Ω) = −1/(K·log K) · log det(1/m · Wᵀ Ωᵀ Ω W)`. When there are fewer
/// atoms than subspace dimensions the `m x m` Gram `1/m · Ω W Wᵀ Ωᵀ` (same
/// non-zero spectrum) is used with `min(m, K)` in place of `K`. For an
/// effective rank of one the `K·log K` normalizer degenerates and is replaced
/// by 1.
pub fn term_logdet(omega: &DMatrix<f64>, basis: &SubspaceBasis) -> Option<f64> {
    logdet_parts(omega, basis).map(|p| p.value)
}

struct LogDetParts {
    value: f64,
    /// Projected atoms `Ω W`, `m x K`.
    ow: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    scale: f64,
    wide: bool,
}

fn logdet_norm(k: usize) -> f64 {
    if k >= 2 {
        k as f64 * (k as f64).ln()
    } else {
        1.0
    }
}

fn logdet_parts(omega: &DMatrix<f64>, basis: &SubspaceBasis) -> Option<LogDetParts> {
    let m = omega.nrows();
    let k = basis.rank();
    if m == 0 || k == 0 {
        return None;
    }
    let ow = linalg::mul(omega, &basis.w);
    let inv_m = 1.0 / m as f64;
    // m >= K: K x K Gram on the subspace; otherwise the m x m atom Gram.
    let wide = m < k;
    let mut gram = if wide {
        linalg::mul_bt(&ow, &ow)
    } else {
        linalg::mul_at(&ow, &ow)
    };
    gram.scale_mut(inv_m);
    let chol = gram.cholesky()?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    let scale = logdet_norm(m.min(k));
    Some(LogDetParts {
        value: -logdet / scale,
        ow,
        chol,
        scale,
        wide,
    })
}

fn grad_logdet_from_parts(parts: &LogDetParts, omega: &DMatrix<f64>, basis: &SubspaceBasis) -> DMatrix<f64> {
    let m = omega.nrows() as f64;
    let factor = -2.0 / (m * parts.scale);
    if parts.wide {
        // d/dΩ log det(1/m Ω W Wᵀ Ωᵀ) = 2/m · N⁻¹ Ω W Wᵀ
        let t = parts.chol.solve(&parts.ow);
        let mut g = linalg::mul_bt(&t, &basis.w);
        g.scale_mut(factor);
        g
    } else {
        // d/dΩ log det(1/m Wᵀ Ωᵀ Ω W) = 2/m · Ω W M⁻¹ Wᵀ
        let minv_wt = parts.chol.solve(&basis.w.transpose());
        let mut g = linalg::mul(&parts.ow, &minv_wt);
        g.scale_mut(factor);
        g
    }
}

/// Gradient of [`term_logdet`].
pub fn grad_logdet(omega: &DMatrix<f64>, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    let parts = logdet_parts(omega, basis)
        .ok_or_else(|| Error::Numerical("log-det Gram matrix is singular".into()))?;
    Ok(grad_logdet_from_parts(&parts, omega, basis))
}

/// Joint sparsity of mid-resolution data and residuals,
/// `p(Ψ) = c · Σ log(1 + ν((ψᵀy)² − (ψᵀe)²)²)`, `c = 1/(N·d_C·log(1+ν))`.
pub fn term_joint_sparsify(psi: &DMatrix<f64>, ymid: &DMatrix<f64>, e: &DMatrix<f64>, nu: f64) -> f64 {
    let a = linalg::mul(psi, ymid);
    let b = linalg::mul(psi, e);
    joint_from_responses(&a, &b, nu)
}

fn joint_from_responses(a: &DMatrix<f64>, b: &DMatrix<f64>, nu: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let c = sparsify_norm(a.nrows(), a.ncols(), nu);
    c * a
        .iter()
        .zip(b.iter())
        .map(|(&ya, &eb)| {
            let t = ya * ya - eb * eb;
            (nu * t * t).ln_1p()
        })
        .sum::<f64>()
}

pub fn grad_joint_sparsify(
    psi: &DMatrix<f64>,
    ymid: &DMatrix<f64>,
    e: &DMatrix<f64>,
    nu: f64,
) -> DMatrix<f64> {
    let a = linalg::mul(psi, ymid);
    let b = linalg::mul(psi, e);
    grad_joint_from_responses(a, b, ymid, e, nu)
}

fn grad_joint_from_responses(
    mut a: DMatrix<f64>,
    mut b: DMatrix<f64>,
    ymid: &DMatrix<f64>,
    e: &DMatrix<f64>,
    nu: f64,
) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.nrows(), ymid.nrows());
    }
    let c = sparsify_norm(a.nrows(), a.ncols(), nu);
    for (ya, eb) in a.iter_mut().zip(b.iter_mut()) {
        let t = *ya * *ya - *eb * *eb;
        let w = c * 4.0 * nu * t / (1.0 + nu * t * t);
        *ya *= w;
        *eb *= w;
    }
    let mut g = linalg::mul_bt(&a, ymid);
    g -= linalg::mul_bt(&b, e);
    g
}

/// Weighted composite `f = g + κ·h + μ·p` with the data each term reads.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSpec<'a> {
    /// Data the sparsity term `g` is evaluated on.
    pub data: &'a DMatrix<f64>,
    pub nu: f64,
    /// Basis for the log-det term and the feasible set.
    pub basis: &'a SubspaceBasis,
    pub kappa: f64,
    /// `(Y_mid, E)` pair for the joint-sparsity term, weighted by `mu`.
    pub joint: Option<(&'a DMatrix<f64>, &'a DMatrix<f64>)>,
    pub mu: f64,
}

/// Individual term values at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValues {
    pub sparsify: f64,
    pub logdet: f64,
    pub joint: f64,
    pub total: f64,
}

impl<'a> ObjectiveSpec<'a> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.data.nrows() != n || self.basis.dim() != n {
            return Err(Error::dims(format!(
                "dictionary has {n} columns, data {} rows, basis {} rows",
                self.data.nrows(),
                self.basis.dim()
            )));
        }
        if let Some((y, e)) = self.joint {
            if y.shape() != e.shape() || y.nrows() != n {
                return Err(Error::dims("joint-sparsity data must be n x N pairs"));
            }
        }
        if !(self.nu > 0.0) || self.kappa < 0.0 || self.mu < 0.0 {
            return Err(Error::invalid("objective needs nu > 0, kappa >= 0, mu >= 0"));
        }
        Ok(())
    }

    fn uses_logdet(&self) -> bool {
        self.kappa > 0.0
    }

    fn uses_joint(&self) -> Option<(&'a DMatrix<f64>, &'a DMatrix<f64>)> {
        self.joint.filter(|_| self.mu > 0.0)
    }

    /// Term-by-term values; `total` is `+∞` when the log-det term is.
    pub fn terms(&self, omega: &DMatrix<f64>) -> TermValues {
        let sparsify = term_sparsify(omega, self.data, self.nu);
        let logdet = if self.uses_logdet() {
            term_logdet(omega, self.basis).unwrap_or(f64::INFINITY)
        } else {
            0.0
        };
        let joint = match self.uses_joint() {
            Some((y, e)) => term_joint_sparsify(omega, y, e, self.nu),
            None => 0.0,
        };
        let total = sparsify + self.kappa * logdet + self.mu * joint;
        TermValues {
            sparsify,
            logdet,
            joint,
            total,
        }
    }

    pub fn value(&self, omega: &DMatrix<f64>) -> f64 {
        self.terms(omega).total
    }

    /// Objective value and Euclidean gradient. Fails when the log-det Gram
    /// matrix is singular.
    pub fn value_and_gradient(&self, omega: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let a = linalg::mul(omega, self.data);
        let mut value = sparsify_from_responses(&a, self.nu);
        let mut grad = grad_sparsify_from_responses(a, self.data, self.nu);

        if self.uses_logdet() {
            let parts = logdet_parts(omega, self.basis)
                .ok_or_else(|| Error::Numerical("log-det Gram matrix is singular".into()))?;
            value += self.kappa * parts.value;
            let g = grad_logdet_from_parts(&parts, omega, self.basis);
            grad += &g * self.kappa;
        }
        if let Some((y, e)) = self.uses_joint() {
            let a = linalg::mul(omega, y);
            let b = linalg::mul(omega, e);
            value += self.mu * joint_from_responses(&a, &b, self.nu);
            let g = grad_joint_from_responses(a, b, y, e, self.nu);
            grad += &g * self.mu;
        }
        Ok((value, grad))
    }

    /// Gradient only; see [`Self::value_and_gradient`].
    pub fn gradient(&self, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.value_and_gradient(omega).map(|(_, g)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_identity_is_one() {
        for n in [2usize, 3, 6] {
            let basis = SubspaceBasis::full(n);
            let omega = DMatrix::identity(n, n);
            assert!((term_logdet(&omega, &basis).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn logdet_orthogonal_atoms_are_singular() {
        // W = e1, e2; every atom lives on e3.
        let w = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let u = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let basis = SubspaceBasis::from_parts(w, u).unwrap();
        let omega = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        assert!(term_logdet(&omega, &basis).is_none());
        assert!(grad_logdet(&omega, &basis).is_err());
    }

    #[test]
    fn sparsify_simple_values() {
        let omega = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 5.0]);
        assert!((term_sparsify(&omega, &x, 1.0) - 1.0).abs() < 1e-15);
        let x_perp = DMatrix::from_column_slice(2, 3, &[0.0, 1.0, 0.0, -2.0, 0.0, 3.0]);
        assert_eq!(term_sparsify(&omega, &x_perp, 10.0), 0.0);
    }

    #[test]
    fn sparsify_gradient_vanishes_without_responses() {
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let x = DMatrix::from_column_slice(2, 2, &[0.0, 1.0, 0.0, 2.0]);
        assert!(grad_sparsify(&omega, &x, 5.0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn joint_sign_symmetric_residuals_vanish() {
        let psi = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 0.2]);
        let y = DMatrix::from_fn(3, 5, |i, j| (i as f64 - j as f64) * 0.3);
        assert_eq!(term_joint_sparsify(&psi, &y, &y, 50.0), 0.0);
        assert_eq!(term_joint_sparsify(&psi, &y, &(-&y), 50.0), 0.0);
    }
}
