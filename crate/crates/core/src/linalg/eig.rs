use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Top eigenpairs, eigenvalues in descending order, one eigenvector per column.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Maximum tolerated `|a_ij - a_ji|`, relative to `max(1, max|a_ij|)`.
    pub symmetry_tol: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { symmetry_tol: 1e-10 }
    }
}

/// Lower-triangular Cholesky factor `L` with `B = L Lᵀ`.
///
/// Fails on the first pivot that is not strictly positive and reports it.
pub fn cholesky(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::validation(format!(
            "Cholesky needs a square matrix, got {}x{}",
            n,
            b.ncols()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = b[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

pub fn check_symmetric(a: &DMatrix<f64>, tol: f64, name: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::validation(format!(
            "{name} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("{name} has non-finite entries")));
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return Err(Error::validation(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Flips each column so that its largest-magnitude entry is positive.
/// The first index wins when magnitudes tie.
pub fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, sorted descending.
pub fn sym_eig_sorted(a: &DMatrix<f64>) -> EigResult {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    EigResult { values, vectors }
}

/// Top-`k` solutions of `A w = λ B w` for symmetric `A` and positive-definite `B`.
///
/// `B` is factored as `L Lᵀ` and the standard problem on `L⁻¹ A L⁻ᵀ` is
/// solved; eigenvectors come back `B`-orthonormal with the sign convention
/// of [`fix_signs`].
pub fn sym_generalized_eig(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: usize,
    opts: &EigOptions,
) -> Result<EigResult> {
    check_symmetric(a, opts.symmetry_tol, "A")?;
    check_symmetric(b, opts.symmetry_tol, "B")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::validation(format!(
            "A is {n}x{n} but B is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if k > n {
        return Err(Error::validation(format!(
            "requested {k} eigenpairs of a {n}-dimensional problem"
        )));
    }
    let l = cholesky(b)?;
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let full = sym_eig_sorted(&whitened);
    let top = full.vectors.columns(0, k).into_owned();
    let mut vectors = l
        .transpose()
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    fix_signs(&mut vectors);
    Ok(EigResult {
        values: full.values.rows(0, k).into_owned(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Cyclic Jacobi rotations; slow but independent of the library path.
    fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        vals.sort_by(|x, y| y.total_cmp(x));
        vals
    }

    #[test]
    fn identity_problem() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let r = sym_generalized_eig(&eye, &eye, 3, &EigOptions::default()).unwrap();
        for v in r.values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::identity(2, 2);
        let r = sym_generalized_eig(&a, &b, 2, &EigOptions::default()).unwrap();
        assert!((r.values[0] - 3.0).abs() < 1e-12);
        assert!((r.values[1] - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.vectors[(0, 0)] - h).abs() < 1e-12);
        assert!((r.vectors[(1, 0)] - h).abs() < 1e-12);
        // (1,-1)/√2 up to the sign convention: the first entry wins the tie.
        assert!((r.vectors[(0, 1)] - h).abs() < 1e-12);
        assert!((r.vectors[(1, 1)] + h).abs() < 1e-12);
    }

    #[test]
    fn matches_jacobi_oracle_on_random_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_matrix(&mut rng, 6, 6);
        let a = &g + g.transpose();
        let h = random_matrix(&mut rng, 6, 6);
        let b = &h * h.transpose() + DMatrix::identity(6, 6) * 0.5;
        // Oracle: explicit inverse of an independently computed factor.
        let l_oracle = nalgebra::Cholesky::new(b.clone()).unwrap().l();
        let linv = l_oracle.try_inverse().unwrap();
        let expected = jacobi_eigenvalues(&(&linv * &a * linv.transpose()));

        let r = sym_generalized_eig(&a, &b, 6, &EigOptions::default()).unwrap();
        for (got, want) in r.values.iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        }
        // Residual and B-orthonormality.
        let norm_a = a.abs().row_sum().amax();
        for k in 0..6 {
            let w = r.vectors.column(k);
            let resid = &a * w - &b * w * r.values[k];
            assert!(resid.amax() <= 1e-8 * norm_a);
        }
        let gram = r.vectors.transpose() * &b * &r.vectors;
        assert!((gram - DMatrix::<f64>::identity(6, 6)).amax() < 1e-8);
    }

    #[test]
    fn sign_convention_is_largest_magnitude_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_matrix(&mut rng, 5, 5);
        let a = &g * g.transpose();
        let r = sym_generalized_eig(&a, &DMatrix::identity(5, 5), 5, &EigOptions::default()).unwrap();
        for col in r.vectors.column_iter() {
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let eye = DMatrix::identity(2, 2);
        assert!(matches!(
            sym_generalized_eig(&a, &eye, 1, &EigOptions::default()),
            Err(Error::Validation(_))
        ));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match sym_generalized_eig(&eye, &b, 1, &EigOptions::default()) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(sym_generalized_eig(&eye, &eye, 3, &EigOptions::default()).is_err());
    }
}
