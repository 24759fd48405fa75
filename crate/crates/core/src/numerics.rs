//! Numerical contracts underneath the filter algebra: symmetric matrix
//! handling, symmetric inverse square roots, and angle arithmetic.
//!
//! Covariance matrices drift off the symmetric cone under repeated
//! floating-point propagate/update cycles, so every filter re-symmetrizes
//! after each step. Innovation covariances are inverted (and whitened) through
//! the symmetric eigendecomposition here, behind a single conditioning guard:
//! a symmetric matrix is treated as positive definite only when its smallest
//! eigenvalue exceeds [`SPD_REL_TOL`] times its largest, which is the same
//! test as capping the condition number at `1 / SPD_REL_TOL`. A near-singular
//! innovation covariance signals a degenerate measurement model and is
//! surfaced as an error rather than silently regularized.

use nalgebra::DMatrix;

use crate::error::{dim_error, Error, Result};

/// Square real matrix that is symmetric by convention. Producers re-establish
/// exact symmetry with [`symmetrize`] after arithmetic that can break it.
pub type SymMatrix = DMatrix<f64>;

/// Relative eigenvalue floor for positive definiteness: reject when
/// `lambda_min <= SPD_REL_TOL * lambda_max` (condition number above `1e12`).
pub const SPD_REL_TOL: f64 = 1e-12;

/// Relative tolerance for "is PSD" checks on repaired or maintained
/// covariances: eigenvalues may sit above `-PSD_EIG_TOL * lambda_max`.
pub const PSD_EIG_TOL: f64 = 1e-10;

/// Projects a square matrix onto the symmetric cone: `(m + m^T) / 2`.
///
/// Exact fixed point on symmetric input, and a projection: applying it twice
/// gives the same bits as applying it once.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<SymMatrix> {
    if !m.is_square() {
        return Err(dim_error("square matrix", format_shape(m)));
    }
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    Ok(out)
}

/// In-place [`symmetrize`] for matrices already known to be square.
pub(crate) fn symmetrize_mut(m: &mut DMatrix<f64>) {
    debug_assert!(m.is_square());
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigendecomposition of the symmetrized input with the PD guard applied.
fn spd_eigen(s: &SymMatrix) -> Result<(DMatrix<f64>, nalgebra::DVector<f64>)> {
    if !s.is_square() {
        return Err(dim_error("square matrix", format_shape(s)));
    }
    let eig = symmetrize(s)?.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lambda_max > 0.0) || lambda_min <= SPD_REL_TOL * lambda_max {
        return Err(Error::Singular {
            eigenvalue: lambda_min,
        });
    }
    Ok((eig.eigenvectors, eig.eigenvalues))
}

/// Symmetric principal inverse square root: returns `M` with `M * M = s^{-1}`.
///
/// Built from the eigendecomposition `s = V diag(l) V^T` as
/// `M = V diag(1/sqrt(l)) V^T`, so `M` is itself symmetric and whitening a
/// residual and shaping a gain with the same factor compose to the full
/// inverse. (A Cholesky factor `L^{-T}` would serve too, but then the gain and
/// residual sides need transposed factors; the symmetric root keeps both sides
/// identical.)
pub fn sym_inv_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    let (v, lambda) = spd_eigen(s)?;
    let d = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / crate::fmath::sqrt(l)));
    let m = &v * d * v.transpose();
    symmetrize(&m)
}

/// Symmetric inverse via the same eigendecomposition and guard as
/// [`sym_inv_sqrt`].
pub fn sym_inverse(s: &SymMatrix) -> Result<SymMatrix> {
    let (v, lambda) = spd_eigen(s)?;
    let d = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l));
    let m = &v * d * v.transpose();
    symmetrize(&m)
}

/// Clamps the eigenvalues of a symmetric matrix below at `floor` and
/// reassembles. Total on symmetric input; PSD input (with `floor <= 0`) is
/// returned unchanged up to eigendecomposition roundoff.
pub fn psd_repair(m: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if !m.is_square() {
        return Err(dim_error("square matrix", format_shape(m)));
    }
    let eig = symmetrize(m)?.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(floor)));
    let repaired = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    symmetrize(&repaired)
}

/// Wraps an angle into `(-pi, pi]`; the `-pi` boundary maps to `+pi`.
///
/// Errors on non-finite input. Hot paths that have already validated their
/// inputs use [`wrap_finite`].
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite { what: "angle" });
    }
    Ok(wrap_finite(a))
}

/// Infallible angle wrap into `(-pi, pi]` for inputs known to be finite.
///
/// Exactly idempotent: for any output `y`, `wrap_finite(y) == y` bitwise.
pub fn wrap_finite(a: f64) -> f64 {
    debug_assert!(a.is_finite());
    let tau = 2.0 * core::f64::consts::PI;
    // fmod keeps the dividend's sign and is exact; shift into [0, tau] first.
    let m = a % tau;
    let r = if m < 0.0 { m + tau } else { m };
    if r > core::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

/// Spectral (2-norm) condition number, via singular values. Used to guard the
/// invertibility of motion Jacobians and their accumulated products.
pub fn cond_2(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let s_max = sv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if s_min <= 0.0 {
        f64::INFINITY
    } else {
        s_max / s_min
    }
}

fn format_shape(m: &DMatrix<f64>) -> alloc::string::String {
    alloc::format!("{}x{}", m.nrows(), m.ncols())
}
