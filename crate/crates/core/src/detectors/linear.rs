//! Direct regularized least-squares (LMMSE) solutions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ChannelRealization;

/// `(H^H H + gamma I)^{-1} H^H r`.
///
/// `gamma = 0` is zero forcing and fails with [`Error::Singular`] when `H`
/// lacks full column rank.
pub fn linear_mmse_direct(channel: &ChannelRealization, r: &[Complex64], gamma: f64) -> Result<Vec<Complex64>> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("regularization must be nonnegative, got {gamma}")));
    }
    let h = channel.matrix();
    check_len(h, r)?;
    let rv = DVector::from_column_slice(r);
    let mut gram = h.adjoint() * h;
    for j in 0..gram.ncols() {
        gram[(j, j)] += gamma;
    }
    solve_hermitian(gram, h.adjoint() * rv)
}

/// Per-antenna weighted form `(H^H G^{-1} H + I)^{-1} H^H G^{-1} r`, `G = diag(gamma)`.
///
/// With all `gamma` equal this coincides with [`linear_mmse_direct`].
pub fn linear_mmse_weighted(channel: &ChannelRealization, r: &[Complex64], gamma: &[f64]) -> Result<Vec<Complex64>> {
    let h = channel.matrix();
    check_len(h, r)?;
    if gamma.len() != h.nrows() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), actual: gamma.len(), context: "noise weights" });
    }
    if gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidConfig("noise weights must be positive".into()));
    }
    let mut weighted = h.clone();
    for (i, g) in gamma.iter().enumerate() {
        let mut row = weighted.row_mut(i);
        row /= Complex64::new(*g, 0.0);
    }
    let mut gram = h.adjoint() * &weighted;
    for j in 0..gram.ncols() {
        gram[(j, j)] += 1.0;
    }
    let rhs = weighted.adjoint() * DVector::from_column_slice(r);
    solve_hermitian(gram, rhs)
}

fn check_len(h: &DMatrix<Complex64>, r: &[Complex64]) -> Result<()> {
    if r.len() != h.nrows() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), actual: r.len(), context: "received vector" });
    }
    Ok(())
}

fn solve_hermitian(gram: DMatrix<Complex64>, rhs: DVector<Complex64>) -> Result<Vec<Complex64>> {
    let scale = gram.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d.re * d.re).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::Singular(format!("pivot {min_pivot:e} relative to scale {scale:e}")));
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}
