use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ncut::degree_normalized;
use super::{argmax, ClusterAssignment};
use crate::linalg::SparseMatrix;
use crate::{Error, Result};

/// How document–topic weights are rescaled by the topic–tag factor before
/// taking the per-row argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmfNormalization {
    /// `Ũ_dk = U_dk / ‖V_k‖`.
    DivideByTopicNorm,
    /// `Ũ_dk = U_dk · ‖V_k‖`, which leaves the argmax invariant to the
    /// scale ambiguity of the factorization.
    MultiplyByTopicNorm,
}

#[derive(Debug, Clone, Copy)]
pub struct NmfOptions {
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    pub normalization: NmfNormalization,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions {
            max_iters: 200,
            tol: 1e-9,
            seed: 0,
            normalization: NmfNormalization::DivideByTopicNorm,
        }
    }
}

/// `‖M − W H‖²_F` for sparse `M`, using `‖WH‖² = tr(WᵀW · HHᵀ)`.
fn objective(m: &SparseMatrix, m_norm2: f64, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let mut cross = 0.0;
    for (i, j, v) in m.triplets() {
        cross += v * w.row(i).dot(&h.column(j).transpose());
    }
    let wtw = w.tr_mul(w);
    let hht = h * h.transpose();
    let fit = wtw.component_mul(&hht).sum();
    (m_norm2 - 2.0 * cross + fit).max(0.0)
}

/// Multiplicative-update NMF of `D^{-1/2} T ≈ W H` with hard labels from the
/// rescaled document–topic factor.
pub fn nmf_cluster(t: &SparseMatrix, c: usize, opts: &NmfOptions) -> Result<ClusterAssignment> {
    if c == 0 {
        return Err(Error::validation("NMF needs at least one topic"));
    }
    if let Some(v) = t.values().iter().find(|&&v| v < 0.0) {
        return Err(Error::validation(format!("NMF needs nonnegative input, found {v}")));
    }
    let (n, vocab) = (t.nrows(), t.ncols());
    let (m, deg) = degree_normalized(t);
    let m_norm2 = m.frobenius_norm_squared();
    let mean = m.values().iter().sum::<f64>() / (n * vocab).max(1) as f64;
    let init_scale = (mean / c as f64).sqrt().max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w = DMatrix::from_fn(n, c, |_, _| init_scale * rng.random_range(0.01..1.0));
    let mut h = DMatrix::from_fn(c, vocab, |_, _| init_scale * rng.random_range(0.01..1.0));

    let mut trace = vec![objective(&m, m_norm2, &w, &h)];
    for _ in 0..opts.max_iters {
        // H ← H ∘ (WᵀM) / (WᵀW H)
        let wtm = m.transpose_mul_dense(&w).transpose();
        let denom = w.tr_mul(&w) * &h;
        h.zip_zip_apply(&wtm, &denom, |x, num, den| {
            *x = if den > 0.0 { *x * num / den } else { 0.0 };
        });
        // W ← W ∘ (M Hᵀ) / (W H Hᵀ)
        let ht = h.transpose();
        let mht = m.mul_dense(&ht);
        let denom = &w * (&h * &ht);
        w.zip_zip_apply(&mht, &denom, |x, num, den| {
            *x = if den > 0.0 { *x * num / den } else { 0.0 };
        });
        let obj = objective(&m, m_norm2, &w, &h);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if prev - obj <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let topic_norms: Vec<f64> = h.row_iter().map(|r| r.norm()).collect();
    let labels = (0..n)
        .map(|i| {
            argmax((0..c).map(|k| {
                let norm = topic_norms[k];
                match opts.normalization {
                    NmfNormalization::DivideByTopicNorm if norm > 0.0 => w[(i, k)] / norm,
                    NmfNormalization::DivideByTopicNorm => 0.0,
                    NmfNormalization::MultiplyByTopicNorm => w[(i, k)] * norm,
                }
            }))
        })
        .collect();
    let mut out = ClusterAssignment::from_labels(labels, c);
    out.flagged_items = (0..n).filter(|&i| deg[i] <= 0.0).collect();
    out.objective_trace = trace;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::adjusted_rand_index;
    use super::*;

    fn random_tags(seed: u64, n: usize, t: usize, density: f64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..t {
                if rng.random::<f64>() < density {
                    trip.push((i, j, 1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n, t, trip).unwrap()
    }

    #[test]
    fn rank_one_single_topic() {
        let u = [1.0, 2.0, 0.5, 3.0];
        let v = [1.0, 0.0, 2.0];
        let t = SparseMatrix::from_dense(&DMatrix::from_fn(4, 3, |i, j| u[i] * v[j]));
        let a = nmf_cluster(&t, 1, &NmfOptions { max_iters: 500, ..Default::default() }).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
        assert!(*a.objective_trace.last().unwrap() <= 1e-6);
    }

    #[test]
    fn objective_non_increasing() {
        for seed in 0..20 {
            let t = random_tags(100 + seed, 40, 15, 0.2);
            let a = nmf_cluster(&t, 3, &NmfOptions { seed, tol: 0.0, max_iters: 100, ..Default::default() }).unwrap();
            for w in a.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn planted_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut trip = Vec::new();
        let mut planted = Vec::new();
        for i in 0..200 {
            let b = i % 2;
            planted.push(b);
            let mut cols: Vec<usize> = (0..4).map(|_| b * 10 + rng.random_range(0..10)).collect();
            cols.sort_unstable();
            cols.dedup();
            trip.extend(cols.into_iter().map(|j| (i, j, 1.0)));
        }
        let t = SparseMatrix::from_triplets(200, 20, trip).unwrap();
        for norm in [NmfNormalization::DivideByTopicNorm, NmfNormalization::MultiplyByTopicNorm] {
            let a = nmf_cluster(&t, 2, &NmfOptions { normalization: norm, ..Default::default() }).unwrap();
            assert!(adjusted_rand_index(&a.labels, &planted) >= 0.9);
        }
    }

    #[test]
    fn rejects_negative_input() {
        let t = SparseMatrix::from_triplets(2, 2, [(0, 0, -1.0)]).unwrap();
        assert!(nmf_cluster(&t, 1, &NmfOptions::default()).is_err());
    }
}
