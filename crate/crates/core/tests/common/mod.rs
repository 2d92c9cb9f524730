//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition by cyclic Jacobi rotations, eigenvalues
/// descending with matching eigenvector columns.
pub fn jacobi_eigh(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// `S^{-1/2}` of a symmetric positive definite matrix.
pub fn inv_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigh(s);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|l| 1.0 / l.sqrt())));
    &vectors * d * vectors.transpose()
}

pub fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mean = x.column(j).sum() / n;
        for i in 0..x.nrows() {
            out[(i, j)] -= mean;
        }
    }
    out
}

/// Population cross-covariance of the columns of `x` and `y`.
pub fn cross_cov(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (xc, yc) = (centered(x), centered(y));
    let n = x.nrows() as f64;
    DMatrix::from_fn(x.ncols(), y.ncols(), |i, j| xc.column(i).dot(&yc.column(j)) / n)
}

/// Regularized block-diagonal covariance `diag(Cᵢᵢ + εI)` of the views.
pub fn block_covariance(views: &[&DMatrix<f64>], eps: f64) -> DMatrix<f64> {
    let total: usize = views.iter().map(|v| v.ncols()).sum();
    let mut b = DMatrix::zeros(total, total);
    let mut at = 0;
    for v in views {
        let c = cross_cov(v, v) + DMatrix::identity(v.ncols(), v.ncols()) * eps;
        b.view_mut((at, at), (v.ncols(), v.ncols())).copy_from(&c);
        at += v.ncols();
    }
    b
}

/// Full covariance of the column-stacked views.
pub fn full_covariance(views: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = views[0].nrows();
    let total: usize = views.iter().map(|v| v.ncols()).sum();
    let mut stacked = DMatrix::zeros(n, total);
    let mut at = 0;
    for v in views {
        stacked.columns_mut(at, v.ncols()).copy_from(v);
        at += v.ncols();
    }
    cross_cov(&stacked, &stacked)
}

/// Canonical correlations from the singular values of
/// `Cxx^{-1/2} Cxy Cyy^{-1/2}`, descending.
pub fn whitened_cca(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let m = inv_sqrt(&cross_cov(x, x)) * cross_cov(x, y) * inv_sqrt(&cross_cov(y, y));
    let (values, _) = jacobi_eigh(&(m.transpose() * &m));
    values.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Eigenvalues of `A w = λ B w` through `B^{-1/2} A B^{-1/2}`, descending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let w = inv_sqrt(b);
    let m = &w * a * &w;
    jacobi_eigh(&((&m + m.transpose()) * 0.5)).0
}

/// Top-`n_neighbors` items by cosine of `scale`-weighted vectors (ties by
/// ascending id), then the `n_tags` most frequent tags among them (each
/// neighbor counted once per tag; ties alphabetical).
pub fn brute_force_annotation(
    items: &[(String, Vec<String>, DVector<f64>)],
    scale: &DVector<f64>,
    query: &DVector<f64>,
    n_neighbors: usize,
    n_tags: usize,
) -> Vec<String> {
    let unit = |v: &DVector<f64>| {
        let s = v.component_mul(scale);
        let n = s.norm();
        s / n
    };
    let q = unit(query);
    let mut scored: Vec<(f64, &String, &Vec<String>)> = items
        .iter()
        .map(|(id, tags, x)| {
            let u = unit(x);
            let dot: f64 = (0..q.len()).map(|k| q[k] * u[k]).sum();
            (dot, id, tags)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1)));
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (_, _, tags) in scored.iter().take(n_neighbors) {
        let distinct: HashSet<&String> = tags.iter().collect();
        for t in distinct {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(n_tags).map(|(t, _)| t.to_string()).collect()
}

/// Exact Gaussian kernel `exp(−‖x−y‖² / 2σ²)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}
