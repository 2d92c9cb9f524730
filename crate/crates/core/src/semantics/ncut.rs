use nalgebra::DMatrix;

use super::kmeans::{kmeans, KMeansOptions};
use super::ClusterAssignment;
use crate::linalg::{truncated_svd, SparseMatrix, SvdOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NcutOptions {
    pub kmeans: KMeansOptions,
    pub svd: SvdOptions,
    /// Singular directions below `rank_tol · σ₁` are discarded before row
    /// normalization.
    pub rank_tol: f64,
}

impl Default for NcutOptions {
    fn default() -> Self {
        NcutOptions {
            kmeans: KMeansOptions::default(),
            svd: SvdOptions {
                oversampling: 20,
                ..SvdOptions::default()
            },
            rank_tol: 1e-10,
        }
    }
}

/// Degrees `D = diag(T (Tᵀ 1))` of the item–item co-tag graph.
pub(crate) fn cotag_degrees(t: &SparseMatrix) -> Vec<f64> {
    t.mul_vec(&t.col_sums())
}

/// `D^{-1/2} T`, with zero-degree rows left at zero.
pub(crate) fn degree_normalized(t: &SparseMatrix) -> (SparseMatrix, Vec<f64>) {
    let deg = cotag_degrees(t);
    let scale: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    (t.scale_rows(&scale), deg)
}

/// Row-normalized leading left singular vectors of `m`, plus the matching
/// right singular basis.
pub(crate) fn spectral_embedding(
    m: &SparseMatrix,
    c: usize,
    opts: &NcutOptions,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let rank = c.min(m.ncols()).min(m.nrows());
    let svd = truncated_svd(m, rank, &opts.svd)?;
    let keep = svd
        .s
        .iter()
        .take_while(|&&s| s > opts.rank_tol * svd.s[0])
        .count()
        .max(1);
    let mut embedded = svd.u.columns(0, keep).into_owned();
    for mut row in embedded.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok((embedded, svd.vt.rows(0, keep).transpose()))
}

/// Normalized-cut clustering of tag vectors.
///
/// The top `c` left singular vectors of `D^{-1/2} T` are row-normalized and
/// clustered by k-means. Zero-degree rows are left out and afterwards join
/// the cluster of the nearest clustered row in the compressed tag space.
pub fn normalized_cut_cluster(t: &SparseMatrix, c: usize, opts: &NcutOptions) -> Result<ClusterAssignment> {
    if c < 2 {
        return Err(Error::validation(format!("normalized cut needs c >= 2, got {c}")));
    }
    if t.values().iter().any(|&v| v < 0.0) {
        return Err(Error::validation("normalized cut needs a nonnegative tag matrix"));
    }
    let n = t.nrows();
    let (normalized, deg) = degree_normalized(t);
    let active: Vec<usize> = (0..n).filter(|&i| deg[i] > 0.0).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| deg[i] <= 0.0).collect();
    if active.len() < c {
        return Err(Error::validation(format!(
            "normalized cut needs at least {c} items with tags, have {}",
            active.len()
        )));
    }
    let m = normalized.select_rows(&active);
    let (embedded, basis) = spectral_embedding(&m, c, opts)?;
    let sub = kmeans(&embedded, c, &opts.kmeans)?;

    let mut labels = vec![0usize; n];
    for (pos, &i) in active.iter().enumerate() {
        labels[i] = sub.labels[pos];
    }
    if !isolated.is_empty() {
        let compressed_active: DMatrix<f64> = m.mul_dense(&basis);
        let compressed_isolated = t.select_rows(&isolated).mul_dense(&basis);
        for (r, &i) in isolated.iter().enumerate() {
            let q = compressed_isolated.row(r);
            let mut nearest = 0;
            let mut best = f64::INFINITY;
            for (pos, row) in compressed_active.row_iter().enumerate() {
                let d = (row - q).norm_squared();
                if d < best {
                    best = d;
                    nearest = pos;
                }
            }
            labels[i] = sub.labels[nearest];
        }
        log::warn!(
            "normalized cut: {} items without tags assigned by nearest neighbor",
            isolated.len()
        );
    }
    let mut out = ClusterAssignment::from_labels(labels, c);
    out.flagged_items = isolated;
    out.objective_trace = sub.objective_trace;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::adjusted_rand_index;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two disjoint tag blocks with random within-block tags.
    pub(crate) fn two_block(seed: u64, n: usize, tags_per_block: usize) -> (SparseMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        let mut planted = Vec::new();
        for i in 0..n {
            let b = i % 2;
            planted.push(b);
            let mut cols: Vec<usize> = (0..4).map(|_| b * tags_per_block + rng.random_range(0..tags_per_block)).collect();
            cols.sort_unstable();
            cols.dedup();
            trip.extend(cols.into_iter().map(|j| (i, j, 1.0)));
        }
        (SparseMatrix::from_triplets(n, 2 * tags_per_block, trip).unwrap(), planted)
    }

    #[test]
    fn recovers_disjoint_blocks() {
        let (t, planted) = two_block(1, 200, 10);
        let a = normalized_cut_cluster(&t, 2, &NcutOptions::default()).unwrap();
        assert_eq!(adjusted_rand_index(&a.labels, &planted), 1.0);
    }

    #[test]
    fn identical_rows_form_one_cluster() {
        let t = SparseMatrix::from_triplets(10, 3, (0..10).flat_map(|i| [(i, 0, 1.0), (i, 2, 1.0)])).unwrap();
        let a = normalized_cut_cluster(&t, 3, &NcutOptions::default()).unwrap();
        assert!(a.labels.iter().all(|&l| l == a.labels[0]));
        assert_eq!(a.empty_clusters.len(), 2);
    }

    #[test]
    fn zero_rows_are_flagged_and_assigned() {
        let (t, _) = two_block(2, 40, 5);
        let mut trip: Vec<_> = t.triplets().collect();
        trip.retain(|&(i, _, _)| i != 3);
        let t = SparseMatrix::from_triplets(40, 10, trip).unwrap();
        let a = normalized_cut_cluster(&t, 2, &NcutOptions::default()).unwrap();
        assert_eq!(a.flagged_items, vec![3]);
        assert!(a.labels[3] < 2);
        assert!(normalized_cut_cluster(&t, 1, &NcutOptions::default()).is_err());
    }

    #[test]
    fn embedded_rows_have_unit_norm() {
        let (t, _) = two_block(3, 60, 6);
        let (m, _) = degree_normalized(&t);
        let (embedded, _) = spectral_embedding(&m, 2, &NcutOptions::default()).unwrap();
        for row in embedded.row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-10);
        }
    }
}
