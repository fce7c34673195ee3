//! Hermitian eigen-solvers and positive-semidefinite helpers backed by `faer`.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::matrix::CMatrix;
use super::QmathError;

pub fn to_faer(m: &CMatrix) -> Mat<C64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
/// Only the lower triangle is read.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix), QmathError> {
    let f = to_faer(m);
    let e = f.self_adjoint_eigen(Side::Lower).map_err(|_| QmathError::Eigen)?;
    let s = e.S().column_vector();
    let vals = (0..m.rows()).map(|i| s[i].re).collect();
    Ok((vals, from_faer(e.U())))
}

pub fn eigvalsh(m: &CMatrix) -> Result<Vec<f64>, QmathError> {
    let f = to_faer(m);
    let v = f.self_adjoint_eigenvalues(Side::Lower).map_err(|_| QmathError::Eigen)?;
    Ok(v)
}

pub fn min_eigenvalue(m: &CMatrix) -> Result<f64, QmathError> {
    Ok(eigvalsh(m)?.first().copied().unwrap_or(0.0))
}

/// Σ_k f(λ_k) |v_k⟩⟨v_k|.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix, QmathError> {
    let (vals, vecs) = eigh(m)?;
    Ok(from_spectrum(&vals.iter().map(|&v| f(v)).collect::<Vec<_>>(), &vecs))
}

/// V diag(vals) V†.
pub fn from_spectrum(vals: &[f64], vecs: &CMatrix) -> CMatrix {
    let n = vecs.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let a = vecs[(i, k)] * lam;
            for j in 0..n {
                out[(i, j)] += a * vecs[(j, k)].conj();
            }
        }
    }
    out
}

pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix, QmathError> {
    hermitian_map(m, |v| v.max(0.0).sqrt())
}

pub fn trace_norm(m: &CMatrix) -> Result<f64, QmathError> {
    Ok(eigvalsh(&m.hermitian_part())?.iter().map(|v| v.abs()).sum())
}

/// Uhlmann fidelity (Tr√(√ρ σ √ρ))².
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64, QmathError> {
    let s = psd_sqrt(rho)?;
    let inner = (&(&s * sigma) * &s).hermitian_part();
    let vals = eigvalsh(&inner)?;
    let floor = 64.0 * f64::EPSILON * vals.iter().cloned().fold(0.0, f64::max);
    let t: f64 = vals.iter().filter(|&&v| v > floor).map(|v| v.sqrt()).sum();
    Ok((t * t).clamp(0.0, 1.0))
}

/// Singular values via the eigenvalues of A A†, descending.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>, QmathError> {
    let g = (a * &a.adjoint()).hermitian_part();
    let mut v: Vec<f64> = eigvalsh(&g)?.into_iter().map(|x| x.max(0.0).sqrt()).collect();
    v.reverse();
    Ok(v)
}
