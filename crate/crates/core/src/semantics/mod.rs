//! The semantic view: hard topic indicators from clustering the tags, or
//! supervised keyword indicators.

mod indicator;
mod kmeans;
mod ncut;
mod nmf;
mod plsa;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use indicator::{soft_indicator, supervised_indicator, to_indicator, IndicatorKind, IndicatorMatrix};
pub use kmeans::{kmeans, KMeansOptions};
pub use ncut::{normalized_cut_cluster, NcutOptions};
pub use nmf::{nmf_cluster, NmfNormalization, NmfOptions};
pub use plsa::{plsa_cluster, PlsaOptions};

/// Hard cluster labels plus whatever the algorithm had to report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    /// Clusters that ended with no members.
    pub empty_clusters: Vec<usize>,
    /// Items that could not be clustered normally (zero-degree rows, empty
    /// documents) and were assigned by a fallback rule.
    pub flagged_items: Vec<usize>,
    /// Per-iteration objective of the selected run: k-means cost, NMF
    /// Frobenius error, or pLSA log-likelihood.
    pub objective_trace: Vec<f64>,
    /// Soft memberships when the method produces them (pLSA posteriors).
    pub posteriors: Option<DMatrix<f64>>,
}

impl ClusterAssignment {
    pub(crate) fn from_labels(labels: Vec<usize>, n_clusters: usize) -> Self {
        let mut a = ClusterAssignment {
            labels,
            n_clusters,
            empty_clusters: Vec::new(),
            flagged_items: Vec::new(),
            objective_trace: Vec::new(),
            posteriors: None,
        };
        a.refresh_empty();
        a
    }

    pub(crate) fn refresh_empty(&mut self) {
        let mut counts = vec![0usize; self.n_clusters];
        for &l in &self.labels {
            counts[l] += 1;
        }
        self.empty_clusters = (0..self.n_clusters).filter(|&k| counts[k] == 0).collect();
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Tag clustering method for the unsupervised semantic view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    KMeans,
    NormalizedCut,
    Nmf,
    Plsa,
}

impl ClusterMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::NormalizedCut => "nc",
            ClusterMethod::Nmf => "nmf",
            ClusterMethod::Plsa => "plsa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kmeans" | "k-means" => Some(ClusterMethod::KMeans),
            "nc" | "ncut" | "normalized_cut" => Some(ClusterMethod::NormalizedCut),
            "nmf" => Some(ClusterMethod::Nmf),
            "plsa" => Some(ClusterMethod::Plsa),
            _ => None,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let choose2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&m| choose2(m)).sum();
    let sum_rows: f64 = (0..ka)
        .map(|i| choose2(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let sum_cols: f64 = (0..kb)
        .map(|j| choose2((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = choose2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if (max - expected).abs() < 1e-12 {
        return if (sum_cells - expected).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (sum_cells - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 0, 0]), 1.0);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax([1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax([0.0, 0.0]), 0);
    }
}
