//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Builds a matrix from row-major nested vectors (the JSON convention).
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// 2-norm condition number via singular values; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Condition number after scaling rows and columns to unit 2-norm, which
/// removes the effect of parameter units on the diagnosis.
pub fn equilibrated_condition_number(m: &DMatrix<f64>) -> f64 {
    let mut scaled = m.clone();
    for j in 0..scaled.ncols() {
        let n = scaled.column(j).norm();
        if n > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / n);
        }
    }
    for i in 0..scaled.nrows() {
        let n = scaled.row(i).norm();
        if n > 0.0 {
            scaled.row_mut(i).scale_mut(1.0 / n);
        }
    }
    condition_number(&scaled)
}

/// Moore-Penrose pseudo-inverse discarding singular values below
/// `rel_tol * sigma_max`. Also returns the retained rank.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            rank += 1;
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    (out, rank)
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    sv.iter()
        .filter(|&&s| s > rel_tol * smax && s > 0.0)
        .count()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Largest eigenvalue modulus; zero for an empty matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    symmetrize(m).cholesky().map(|c| c.inverse())
}

/// Kronecker product of a column vector with an identity of size `n`.
pub fn kron_vec_identity(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(v.len() * n, n);
    for (i, &x) in v.iter().enumerate() {
        for r in 0..n {
            out[(i * n + r, r)] = x;
        }
    }
    out
}

/// `I_n (x) v` for a column vector `v`.
pub fn kron_identity_vec(n: usize, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n * v.len(), n);
    for c in 0..n {
        for (i, &x) in v.iter().enumerate() {
            out[(c * v.len() + i, c)] = x;
        }
    }
    out
}
