use nalgebra::{DMatrix, DVector};

use super::eig::{fix_signs, sym_eig_sorted};
use super::{center_columns, column_means};
use crate::{Error, Result};

/// Principal components of a column-centered data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `cols × d`, orthonormal columns.
    pub components: DMatrix<f64>,
    /// Covariance eigenvalues for the retained components, descending.
    pub variances: DVector<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }

    /// `(X − mean) · components`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::validation(format!(
                "PCA expects {} columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.components)
    }

    pub fn reconstruct(&self, projected: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = projected * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }

    /// Mean squared reconstruction error per row.
    pub fn reconstruction_error(&self, x: &DMatrix<f64>) -> Result<f64> {
        let back = self.reconstruct(&self.apply(x)?);
        Ok((x - back).norm_squared() / x.nrows() as f64)
    }
}

/// Covariance of the column-centered data with `1/n` normalization.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (centered, _) = center_columns(x);
    centered.tr_mul(&centered) / x.nrows() as f64
}

/// Fits `d` principal components. Covariance uses `1/n`, so the mean
/// squared reconstruction error equals the sum of discarded eigenvalues.
pub fn pca_fit(x: &DMatrix<f64>, d: usize) -> Result<PcaModel> {
    let (n, cols) = x.shape();
    if n < 2 {
        return Err(Error::validation(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 || d > n.min(cols) {
        return Err(Error::validation(format!(
            "PCA dimension {d} must lie in 1..={}",
            n.min(cols)
        )));
    }
    let mean = column_means(x);
    let eig = sym_eig_sorted(&covariance(x));
    let mut components = eig.vectors.columns(0, d).into_owned();
    fix_signs(&mut components);
    let variances = eig.values.rows(0, d).map(|v| v.max(0.0));
    Ok(PcaModel {
        mean,
        components,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 2.0, 2.0, -2.0, -2.0]);
        let m = pca_fit(&x, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[(0, 0)] - h).abs() < 1e-12);
        assert!((m.components[(1, 0)] - h).abs() < 1e-12);
        assert!(m.variances[1].abs() < 1e-12);
        assert!((m.variances[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(10, 4, |_, _| rng.random_range(-3.0..3.0));
        let m = pca_fit(&x, 4).unwrap();
        assert!(m.reconstruction_error(&x).unwrap() < 1e-20);
    }

    #[test]
    fn truncation_error_equals_discarded_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(20, 6, |_, j| rng.random_range(-1.0..1.0) * (j + 1) as f64);
        // Oracle: all eigenvalues of the explicitly formed covariance.
        let mean = x.row_mean();
        let mut c = x.clone();
        for mut r in c.row_iter_mut() {
            r -= &mean;
        }
        let cov = c.transpose() * &c / 20.0;
        let mut all: Vec<f64> = nalgebra::SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let discarded: f64 = all[3..].iter().sum();

        let m = pca_fit(&x, 3).unwrap();
        let err = m.reconstruction_error(&x).unwrap();
        assert!((err - discarded).abs() <= 1e-8 * discarded);
        let gram = m.components.transpose() * &m.components;
        assert!((gram - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn apply_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(15, 5, |_, _| rng.random_range(-1.0..1.0));
        let m = pca_fit(&x, 3).unwrap();
        let at_mean = DMatrix::from_row_slice(1, 5, m.mean.as_slice());
        assert!(m.apply(&at_mean).unwrap().amax() < 1e-15);
        let proj = m.apply(&x).unwrap();
        for col in proj.column_iter() {
            assert!(col.mean().abs() < 1e-12);
        }
        // Projected training data is decorrelated.
        let cov = proj.transpose() * &proj / 15.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 1e-8);
                }
            }
        }
        assert!(m.variances.as_slice().windows(2).all(|w| w[0] >= w[1]));

        let identity = PcaModel {
            mean: DVector::zeros(5),
            components: DMatrix::identity(5, 5),
            variances: DVector::from_element(5, 1.0),
        };
        assert_eq!(identity.apply(&x).unwrap(), x);
        assert!(identity.apply(&DMatrix::zeros(2, 4)).is_err());
        assert!(pca_fit(&x, 6).is_err());
    }
}
