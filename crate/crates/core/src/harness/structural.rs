//! Structural-learning baseline: ridge predictors from visual features to
//! tags, whose leading left singular vectors embed the visual features.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{cholesky, dense_svd_sorted, fix_signs, sym_eig_sorted, SparseMatrix};
use crate::{Error, Result};

/// Relative shrinkage below which the predictors are considered all zero.
const DEGENERATE_SHRINKAGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    /// `dv × d` embedding matrix `U₁`.
    pub embedding: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub rho: f64,
}

impl StructuralModel {
    pub fn embed(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if v.ncols() != self.embedding.nrows() {
            return Err(Error::validation(format!(
                "features have {} columns, embedding expects {}",
                v.ncols(),
                self.embedding.nrows()
            )));
        }
        Ok(v * &self.embedding)
    }
}

/// Minimizer of `‖T − VW‖² + ρ‖W‖²`: `W = (VᵀV + ρI)⁻¹ VᵀT`.
pub fn ridge_predictors(v: &DMatrix<f64>, t: &SparseMatrix, rho: f64) -> Result<DMatrix<f64>> {
    if v.nrows() != t.nrows() {
        return Err(Error::validation(format!(
            "{} visual rows but {} tag rows",
            v.nrows(),
            t.nrows()
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::validation(format!("rho must be positive, got {rho}")));
    }
    let mut gram = v.transpose() * v;
    let lambda_max = sym_eig_sorted(&gram).values.max().max(0.0);
    if lambda_max / (lambda_max + rho) < DEGENERATE_SHRINKAGE {
        return Err(Error::Numerical(format!(
            "rho {rho:e} shrinks every predictor to zero; the predictor matrix is degenerate"
        )));
    }
    for i in 0..gram.nrows() {
        gram[(i, i)] += rho;
    }
    let vt_t = t.transpose_mul_dense(v).transpose();
    let l = cholesky(&gram)?;
    let y = l
        .solve_lower_triangular(&vt_t)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    l.transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
}

/// Top-`d` left singular vectors of the ridge predictor matrix.
pub fn structural_learning_embed(v: &DMatrix<f64>, t: &SparseMatrix, rho: f64, d: usize) -> Result<StructuralModel> {
    let bound = v.ncols().min(t.ncols());
    if d == 0 || d > bound {
        return Err(Error::validation(format!("d must lie in 1..={bound}, got {d}")));
    }
    let w = ridge_predictors(v, t, rho)?;
    let (u, s, _) = dense_svd_sorted(&w);
    if !(s[0] > 0.0) {
        return Err(Error::Numerical("predictor matrix is zero; the embedding is undefined".into()));
    }
    let mut embedding = u.columns(0, d).into_owned();
    fix_signs(&mut embedding);
    Ok(StructuralModel {
        embedding,
        singular_values: s.rows(0, d).into_owned(),
        rho,
    })
}
