//! Small shared helpers for dense complex linear algebra.
//!
//! Every matrix in this crate is 2x2, 4x4, or at most 16x16 (the vectorized
//! Lyapunov system), so exact dense methods are used throughout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Eigenvalues of a general complex square matrix via the Schur decomposition.
///
/// The returned order is unspecified.
pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            what: "matrix passed to eigensolver".into(),
        });
    }
    let schur = a.clone().schur();
    schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::SingularSolve)
}

/// Largest real part over the eigenvalues of `a` (the spectral abscissa).
pub fn spectral_abscissa(a: &DMatrix<C64>) -> Result<f64> {
    let eig = eigenvalues(a)?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Entrywise complex conjugate.
pub fn conjugate(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.map(|z| z.conj())
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute deviation from Hermiticity, `max |A - A^H|`.
pub fn hermiticity_defect(a: &DMatrix<C64>) -> f64 {
    let adj = a.adjoint();
    (a - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Symmetrize into the nearest Hermitian matrix, `(A + A^H) / 2`.
pub fn hermitian_part(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with the eigenvalues floored at
/// zero. Fails if any eigenvalue lies below `-tol`.
///
/// Returns `(u, lambda)` with `lambda >= 0` such that `a ~ u diag(lambda) u^H`.
pub fn hermitian_psd_factor(a: &DMatrix<C64>, tol: f64) -> Result<(DMatrix<C64>, Vec<f64>)> {
    let se = hermitian_part(a).symmetric_eigen();
    let mut floored = Vec::with_capacity(se.eigenvalues.len());
    for &lam in se.eigenvalues.iter() {
        if lam < -tol {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: lam,
            });
        }
        floored.push(lam.max(0.0));
    }
    Ok((se.eigenvectors, floored))
}

/// A sqrt-factor `w` of a Hermitian PSD matrix, `a = w w^H`, computed from the
/// floored eigendecomposition.
pub fn hermitian_sqrt_factor(a: &DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    let (u, lam) = hermitian_psd_factor(a, tol)?;
    let n = a.nrows();
    let mut w = u;
    for j in 0..n {
        let s = lam[j].sqrt();
        for i in 0..n {
            w[(i, j)] *= C64::new(s, 0.0);
        }
    }
    Ok(w)
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    a.clone().lu().solve(b).ok_or(Error::SingularSolve)
}

/// Matrix exponential `exp(a)` (Pade scaling and squaring).
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.clone().exp()
}
