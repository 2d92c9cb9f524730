use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    /// One-hot rows.
    SingleLabel,
    /// Keyword sets; rows may hold any number of ones.
    MultiHot,
    /// Rows are probability vectors.
    Soft,
}

/// The `n × c` semantic view.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: IndicatorKind,
    /// Rows with no label at all.
    pub flagged_rows: Vec<usize>,
}

pub fn to_indicator(assignment: &ClusterAssignment) -> IndicatorMatrix {
    let mut matrix = DMatrix::zeros(assignment.labels.len(), assignment.n_clusters);
    for (i, &l) in assignment.labels.iter().enumerate() {
        matrix[(i, l)] = 1.0;
    }
    IndicatorMatrix {
        matrix,
        kind: IndicatorKind::SingleLabel,
        flagged_rows: Vec::new(),
    }
}

/// Multi-hot keyword matrix over a fixed keyword vocabulary.
pub fn supervised_indicator<S: AsRef<str>>(item_keywords: &[Vec<S>], vocab: &[String]) -> Result<IndicatorMatrix> {
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let mut matrix = DMatrix::zeros(item_keywords.len(), vocab.len());
    let mut flagged_rows = Vec::new();
    for (i, kws) in item_keywords.iter().enumerate() {
        if kws.is_empty() {
            flagged_rows.push(i);
        }
        for kw in kws {
            let kw = kw.as_ref();
            let j = *index
                .get(kw)
                .ok_or_else(|| Error::validation(format!("item {i}: unknown keyword {kw:?}")))?;
            matrix[(i, j)] = 1.0;
        }
    }
    Ok(IndicatorMatrix {
        matrix,
        kind: IndicatorKind::MultiHot,
        flagged_rows,
    })
}

/// Soft indicator from posterior rows; each must sum to one within 1e-8.
pub fn soft_indicator(posteriors: DMatrix<f64>) -> Result<IndicatorMatrix> {
    for (i, row) in posteriors.row_iter().enumerate() {
        if row.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) || (row.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::validation(format!("row {i} is not a probability vector")));
        }
    }
    Ok(IndicatorMatrix {
        matrix: posteriors,
        kind: IndicatorKind::Soft,
        flagged_rows: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_rows() {
        let a = ClusterAssignment::from_labels(vec![0, 1, 0], 2);
        let m = to_indicator(&a).matrix;
        assert_eq!(m, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]));
        let ones = to_indicator(&ClusterAssignment::from_labels(vec![0; 4], 1)).matrix;
        assert!(ones.iter().all(|&v| v == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..7)).collect();
        let m = to_indicator(&ClusterAssignment::from_labels(labels, 7)).matrix;
        assert!(m.row_iter().all(|r| r.sum() == 1.0));
    }

    #[test]
    fn keyword_matrix() {
        let vocab = vec!["sky".to_string(), "water".to_string(), "dog".to_string()];
        let m = supervised_indicator(&[vec!["sky", "water"], vec![]], &vocab).unwrap();
        assert_eq!(m.matrix.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert_eq!(m.flagged_rows, vec![1]);
        assert!(supervised_indicator(&[vec!["cat"]], &vocab).is_err());
    }

    #[test]
    fn soft_rows_validated() {
        assert!(soft_indicator(DMatrix::from_row_slice(1, 2, &[0.3, 0.7])).is_ok());
        assert!(soft_indicator(DMatrix::from_row_slice(1, 2, &[0.3, 0.6])).is_err());
    }
}
