//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative pivot threshold below which an SPD system is treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

/// Cholesky factorisation that rejects numerically singular matrices.
pub(crate) fn spd_factor(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > PIVOT_RTOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(format!("{what} is numerically singular")));
    }
    Ok(chol)
}

/// X⊤X + λI
pub(crate) fn penalized_gram(x: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let mut g = x.tr_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    g
}

pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn all_finite<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|v| v.is_finite())
}

/// Rows of `x` and entries of `y` at `idx`.
pub(crate) fn select_rows(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    idx: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let xs = DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)]);
    let ys = DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]));
    (xs, ys)
}

/// Largest singular value of `x`.
pub fn largest_singular_value(x: &DMatrix<f64>) -> f64 {
    let gram = x.tr_mul(x);
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v))
        .sqrt()
}
