//! Dense helpers on top of nalgebra: strided products without transposition
//! copies, ridge least squares and orthonormal bases from the SVD.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    out: &mut DMatrix<f64>,
) {
    debug_assert_eq!(out.shape(), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.fill(0.0);
        return;
    }
    // SAFETY: the strides describe column-major views that stay inside the
    // borrowed slices; `out` is an exclusively borrowed column-major m x n buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            0.0,
            out.as_mut_slice().as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// `a * b`
pub fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "mul: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(m, n);
    dgemm(
        m,
        k,
        n,
        (a.as_slice(), 1, m as isize),
        (b.as_slice(), 1, k as isize),
        &mut out,
    );
    out
}

/// `a * bᵀ`
pub fn mul_bt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "mul_bt: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(m, n);
    dgemm(
        m,
        k,
        n,
        (a.as_slice(), 1, m as isize),
        (b.as_slice(), n as isize, 1),
        &mut out,
    );
    out
}

/// `aᵀ * b`
pub fn mul_at(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "mul_at: inner dimensions differ");
    let (m, k, n) = (a.ncols(), a.nrows(), b.ncols());
    let mut out = DMatrix::zeros(m, n);
    dgemm(
        m,
        k,
        n,
        (a.as_slice(), k as isize, 1),
        (b.as_slice(), 1, k as isize),
        &mut out,
    );
    out
}

/// Solves the ridge problem `min_D ‖D X − Y‖²_F + ‖D‖²_F`, i.e.
/// `D = Y Xᵀ (X Xᵀ + I)⁻¹`.
pub fn ridge_least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::dims(format!(
            "least squares with {} inputs and {} targets",
            x.ncols(),
            y.ncols()
        )));
    }
    let mut gram = mul_bt(x, x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += 1.0;
    }
    // (XXᵀ + I) Dᵀ = X Yᵀ
    let rhs = mul_bt(x, y);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations are not positive definite".into()))?;
    Ok(chol.solve(&rhs).transpose())
}

/// Full left singular basis of `x` (`n x n`, columns ordered by decreasing
/// singular value) and the `min(n, N)` singular values.
pub fn left_singular_basis(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n, cols) = x.shape();
    if n == 0 || cols == 0 {
        return Err(Error::degenerate("empty data matrix"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("data matrix has non-finite entries".into()));
    }
    // Reduce to an n x n factor with the same left singular vectors.
    let square = if cols > n {
        // Xᵀ = Q R  ⇒  X = Rᵀ Qᵀ
        let qr = x.transpose().qr();
        qr.r().transpose()
    } else {
        let mut padded = DMatrix::zeros(n, n);
        padded.columns_mut(0, cols).copy_from(x);
        padded
    };
    let svd = SVD::try_new(square, true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let mut sv = svd.singular_values;
    if cols < n {
        sv = sv.rows(0, cols).into_owned();
    }
    Ok((u, sv))
}

/// Moore–Penrose pseudo-inverse; singular values below `rel_tol·σ_max` are
/// treated as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let smax = svd.singular_values.max();
    let eps = rel_tol * smax;
    svd.pseudo_inverse(eps).map_err(|e| Error::Numerical(e.to_string()))
}

/// Scales each row to unit Euclidean norm. Rows with norm below `tiny` are
/// left untouched and their indices returned.
pub fn normalize_rows(m: &mut DMatrix<f64>, tiny: f64) -> Vec<usize> {
    let mut degenerate = Vec::new();
    for i in 0..m.nrows() {
        let norm = m.row(i).norm();
        if norm <= tiny {
            degenerate.push(i);
        } else {
            m.row_mut(i).scale_mut(1.0 / norm);
        }
    }
    degenerate
}
