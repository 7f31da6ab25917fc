//! Small dense helpers over nalgebra's Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) fn cholesky(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    Cholesky::new(a).ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))
}

/// `log det(a)` for symmetric positive-definite `a`.
pub fn log_det_spd(a: DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(a)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Solve `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(cholesky(a)?.solve(b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inverse_spd(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky(a)?.inverse())
}
