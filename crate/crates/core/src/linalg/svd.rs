use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub oversampling: usize,
    /// Power iterations always performed before convergence checks start.
    pub power_iters: usize,
    /// Extra subspace iterations stop once every retained triplet has
    /// residual `max(‖Xv − σu‖, ‖Xᵀu − σv‖) ≤ tol · σ₁`.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversampling: 10,
            power_iters: 2,
            tol: 1e-9,
            max_iters: 200,
            seed: 0,
        }
    }
}

/// `X ≈ U · diag(S) · Vt` with `S` descending.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub vt: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Thin SVD of a dense matrix with singular values sorted descending.
pub fn dense_svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vt");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
    (u.select_columns(&order), s, vt.select_rows(&order))
}

/// One Cholesky-QR pass: `Y R⁻¹` with `RᵀR = YᵀY`. `None` when the Gram
/// matrix is too ill-conditioned for the pass to be accurate.
fn cholesky_qr(y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = (y.transpose() * y).cholesky()?.unpack();
    let diag = l.diagonal();
    if !(diag.min() > 1e-6 * diag.max()) {
        return None;
    }
    let inv = l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.ncols()))?;
    Some(y * inv.transpose())
}

/// Orthonormal basis of the column space: two Cholesky-QR passes, or
/// Householder QR for nearly rank-deficient input.
fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    match cholesky_qr(&y).and_then(|q| cholesky_qr(&q)) {
        Some(q) => q,
        None => y.qr().q(),
    }
}

/// Randomized range finder followed by subspace iteration.
///
/// Iteration runs on the shorter side through `AᵀA` (applied as two sparse
/// products), with Rayleigh–Ritz extraction each step. Once converged the
/// long-side vectors come from an orthonormalization of `A V` and a small
/// dense SVD.
pub fn truncated_svd(x: &SparseMatrix, k: usize, opts: &SvdOptions) -> Result<TruncatedSvd> {
    let (m, n) = (x.nrows(), x.ncols());
    let short = m.min(n);
    if k == 0 || k > short {
        return Err(Error::validation(format!(
            "SVD rank {k} must lie in 1..={short} for a {m}x{n} matrix"
        )));
    }
    let tall = m >= n;
    // `A` is X or Xᵀ, whichever has the short side as its column count.
    let a = |z: &DMatrix<f64>| if tall { x.mul_dense(z) } else { x.transpose_mul_dense(z) };
    let at = |y: &DMatrix<f64>| if tall { x.transpose_mul_dense(y) } else { x.mul_dense(y) };
    let gram = |z: &DMatrix<f64>| at(&a(z));

    let width = (k + opts.oversampling).min(short);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = DMatrix::from_fn(short, width, |_, _| StandardNormal.sample(&mut rng));
    let mut z = orthonormalize(gram(&omega));
    for _ in 0..opts.power_iters {
        z = orthonormalize(gram(&z));
    }

    let mut iterations = opts.power_iters;
    let (v, converged) = loop {
        let w = gram(&z);
        let h = z.transpose() * &w;
        let h = (&h + h.transpose()) * 0.5;
        let eig = super::sym_eig_sorted(&h);
        let e = eig.vectors.columns(0, k).into_owned();
        let v = &z * &e;
        let converged = width == short || {
            let theta1 = eig.values[0].max(0.0);
            let residual = &w * &e - &v * DMatrix::from_diagonal(&eig.values.rows(0, k));
            let worst = (0..k)
                .map(|j| {
                    let sigma = eig.values[j].max(0.0).sqrt();
                    let r = residual.column(j).norm();
                    if sigma > 0.0 { r / sigma } else { r.sqrt() }
                })
                .fold(0.0, f64::max);
            theta1 == 0.0 || worst <= opts.tol * theta1.sqrt()
        };
        if converged || iterations >= opts.max_iters {
            break (v, converged);
        }
        z = orthonormalize(w);
        iterations += 1;
    };
    if !converged {
        log::warn!("truncated SVD stopped after {iterations} iterations without converging");
    }

    let y = a(&v);
    let q = orthonormalize(y.clone());
    let r = q.transpose() * &y;
    let (ur, s, vrt) = dense_svd_sorted(&r);
    let long = &q * ur;
    let short_vecs = v * vrt.transpose();
    let (u, vt) = if tall {
        (long, short_vecs.transpose())
    } else {
        (short_vecs, long.transpose())
    };
    Ok(TruncatedSvd {
        u,
        s,
        vt,
        iterations,
        converged,
    })
}
