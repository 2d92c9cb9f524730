//! Dense and sparse numerical primitives.

mod eig;
mod pca;
mod sparse;
mod svd;

use nalgebra::{DMatrix, DVector};

pub use eig::{cholesky, fix_signs, sym_eig_sorted, sym_generalized_eig, EigOptions, EigResult};
pub use pca::{covariance, pca_fit, PcaModel};
pub use sparse::SparseMatrix;
pub use svd::{dense_svd_sorted, truncated_svd, SvdOptions, TruncatedSvd};

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    if x.nrows() == 0 {
        return DVector::zeros(x.ncols());
    }
    x.row_mean().transpose()
}

/// Subtracts column means; returns the centered matrix and the means.
pub fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = column_means(x);
    let mut out = x.clone();
    let mt = mean.transpose();
    for mut row in out.row_iter_mut() {
        row -= &mt;
    }
    (out, mean)
}

/// Fails unless every entry is finite.
pub fn ensure_finite(x: &DMatrix<f64>, what: &str) -> crate::Result<()> {
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % x.nrows().max(1), pos / x.nrows().max(1));
        return Err(crate::Error::validation(format!(
            "{what} has a non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}
