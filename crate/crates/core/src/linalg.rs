//! Dense complex matrix helpers shared by every module.
//!
//! All operator symbols are carried as `nalgebra::DMatrix<Complex64>`. The
//! helpers here wrap the handful of decompositions the rest of the crate
//! needs (pivoted solves, Hermitian spectra, singular values, polar
//! factors) so that call sites stay close to the matrix formulas.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row/column indexed from zero.
pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Builds a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<Complex64>]) -> CMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    CMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn scalar(z: Complex64) -> CMatrix {
    CMatrix::from_element(1, 1, z)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().min()
}

/// Numerical rank with the usual `max(r,c)·eps·σ_max` cutoff.
pub fn rank(m: &CMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let cutoff = (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * smax.max(f64::MIN_POSITIVE);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// `(M + M*)/2`.
pub fn herm_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `(M - M*)/(2i)`, the Hermitian imaginary part.
pub fn im_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * Complex64::new(0.0, -0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn herm_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = herm_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_min(m: &CMatrix) -> f64 {
    herm_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn lambda_max(m: &CMatrix) -> f64 {
    herm_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Solves `M X = B` with partial pivoting. Fails when the pivoted LU is singular.
pub fn solve(m: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let lu = m.clone().lu();
    lu.solve(b).filter(is_finite)
}

/// Right division `B M^{-1}`, computed as the transpose of `M^T \ B^T`.
pub fn right_divide(b: &CMatrix, m: &CMatrix) -> Option<CMatrix> {
    solve(&m.transpose(), &b.transpose()).map(|x| x.transpose())
}

/// Explicit inverse. Only used where the inverse itself is the returned object.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse().filter(is_finite)
}

/// Clips negative eigenvalues of a Hermitian matrix to zero.
/// Returns the projected matrix and the size of the most negative eigenvalue removed.
pub fn psd_project(m: &CMatrix) -> (CMatrix, f64) {
    let h = herm_part(m);
    let eig = h.clone().symmetric_eigen();
    let defect = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(-l));
    if defect == 0.0 {
        return (h, 0.0);
    }
    let clipped = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    let out = v * CMatrix::from_diagonal(&clipped) * v.adjoint();
    (out, defect)
}

/// Hermitian square root of a Hermitian positive semidefinite matrix.
pub fn herm_sqrt(m: &CMatrix) -> CMatrix {
    let eig = herm_part(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&roots) * v.adjoint()
}

/// Polar decomposition `M = U P` with `U` unitary and `P = (M*M)^{1/2}`.
pub fn polar(m: &CMatrix) -> (CMatrix, CMatrix) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let sig = svd.singular_values.map(|s| Complex64::new(s, 0.0));
    let unitary = &u * &v_t;
    let pos = v_t.adjoint() * CMatrix::from_diagonal(&sig) * &v_t;
    (unitary, pos)
}

/// Determinant via LU.
pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// Eigenvalues of a general square matrix. Triangular inputs are read off
/// the diagonal so nilpotent triangular operators report exact zeros.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let lower = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == ZERO));
    let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == ZERO));
    if lower || upper {
        return Ok((0..n).map(|i| m[(i, i)]).collect());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::InvalidInput("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::InvalidInput("Schur form not triangular".into()))?;
    Ok(ev.iter().copied().collect())
}

/// Stacks `[top; bottom]`.
pub fn vstack(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Concatenates `[left right]`.
pub fn hstack(left: &CMatrix, right: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

/// Block `(bi, bj)` of size `p×p` from a `2p×2p` matrix.
pub fn block(m: &CMatrix, p: usize, bi: usize, bj: usize) -> CMatrix {
    m.view((bi * p, bj * p), (p, p)).into_owned()
}

/// Assembles a `2p×2p` matrix from four `p×p` blocks.
pub fn from_blocks(b11: &CMatrix, b12: &CMatrix, b21: &CMatrix, b22: &CMatrix) -> CMatrix {
    vstack(&hstack(b11, b12), &hstack(b21, b22))
}
