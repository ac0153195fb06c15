//! Small dense complex helpers shared by the diagonalization and rate code.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{RelayError, Result};
use crate::CMatrix;

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::from(values[i]) } else { Complex64::new(0.0, 0.0) })
}

pub fn identity(n: usize) -> CMatrix {
    DMatrix::identity(n, n)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// Checks that `m` is Hermitian positive semidefinite up to a tolerance
/// relative to its magnitude.
pub fn check_psd(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(RelayError::domain(format!("{what} must be square")));
    }
    let scale = m.camax().max(f64::MIN_POSITIVE);
    let asym = (m - m.adjoint()).camax();
    if asym > 1e-9 * scale {
        return Err(RelayError::domain(format!("{what} is not Hermitian")));
    }
    let ev = hermitian_eigenvalues(m);
    if ev.first().copied().unwrap_or(0.0) < -1e-9 * scale {
        return Err(RelayError::domain(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn logdet_hpd(m: &CMatrix) -> Result<f64> {
    let chol =
        hermitian_part(m).cholesky().ok_or_else(|| RelayError::Singular("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

pub fn column_norms_sq(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.norm_squared()).collect()
}

/// Largest absolute deviation of `m` from a diagonal matrix, relative to the
/// largest entry.
pub fn off_diagonal_ratio(m: &CMatrix) -> f64 {
    let scale = m.camax().max(f64::MIN_POSITIVE);
    let mut off = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                off = off.max(m[(i, j)].norm());
            }
        }
    }
    off / scale
}
