//! The tag view: vocabulary, binary or tf-idf tag matrices, and SVD
//! compression of the tag matrix.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{truncated_svd, SparseMatrix, SvdOptions};
use crate::{Error, Result};

/// Retained tags ordered by descending document frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct TagVocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    /// Builds a vocabulary from already ordered terms.
    pub fn from_terms(terms: Vec<String>, doc_freq: Vec<usize>) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::validation("terms and frequencies differ in length"));
        }
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate vocabulary term {t:?}")));
            }
        }
        Ok(TagVocabulary {
            terms,
            doc_freq,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Keeps tags whose document frequency is at least `min_count`, minus the
/// stop words, optionally capped to the `max_terms` most frequent.
pub fn build_vocabulary<S: AsRef<str>>(
    documents: &[Vec<S>],
    min_count: usize,
    stopwords: &HashSet<String>,
    max_terms: Option<usize>,
) -> Result<TagVocabulary> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for doc in documents {
        seen.clear();
        for tag in doc {
            let tag = tag.as_ref();
            if seen.insert(tag) {
                *df.entry(tag).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !stopwords.contains(t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = max_terms {
        kept.truncate(cap);
    }
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    TagVocabulary::from_terms(
        kept.iter().map(|(t, _)| t.to_string()).collect(),
        kept.iter().map(|&(_, c)| c).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagWeighting {
    Binary,
    Weighted,
}

/// `n × t` tag matrix; binary matrices store only ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TagMatrix {
    pub matrix: SparseMatrix,
    pub weighting: TagWeighting,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorizeReport {
    /// Documents with no in-vocabulary tag.
    pub empty_rows: Vec<usize>,
    /// Tag occurrences dropped as out of vocabulary.
    pub oov_tokens: usize,
}

/// Binary document-by-tag matrix. Duplicate tags count once and unknown
/// tags are dropped.
pub fn vectorize<S: AsRef<str>>(
    documents: &[Vec<S>],
    vocab: &TagVocabulary,
) -> (TagMatrix, VectorizeReport) {
    let mut report = VectorizeReport::default();
    let mut rows = Vec::with_capacity(documents.len());
    for (i, doc) in documents.iter().enumerate() {
        let mut cols: Vec<usize> = Vec::with_capacity(doc.len());
        for tag in doc {
            match vocab.index_of(tag.as_ref()) {
                Some(j) => cols.push(j),
                None => report.oov_tokens += 1,
            }
        }
        cols.sort_unstable();
        cols.dedup();
        if cols.is_empty() {
            report.empty_rows.push(i);
        }
        rows.push(cols.into_iter().map(|j| (j, 1.0)).collect::<Vec<_>>());
    }
    let matrix = SparseMatrix::from_rows(vocab.len(), &rows).expect("indices come from the vocabulary");
    (
        TagMatrix {
            matrix,
            weighting: TagWeighting::Binary,
        },
        report,
    )
}

/// Inverse document frequencies `ln(n / df)` of a binary tag matrix; terms
/// that never occur get zero.
pub fn inverse_document_frequencies(t: &TagMatrix) -> Vec<f64> {
    let n = t.matrix.nrows() as f64;
    let mut df = vec![0usize; t.matrix.ncols()];
    for (_, j, _) in t.matrix.triplets() {
        df[j] += 1;
    }
    df.into_iter()
        .map(|d| if d == 0 { 0.0 } else { (n / d as f64).ln() })
        .collect()
}

/// Binary tf times `ln(n / df)`. Terms present in every document get
/// weight zero and are dropped from storage.
pub fn tfidf_weight(t: &TagMatrix) -> Result<(TagMatrix, Vec<f64>)> {
    if t.weighting != TagWeighting::Binary {
        return Err(Error::validation("tf-idf weighting expects a binary tag matrix"));
    }
    let idf = inverse_document_frequencies(t);
    let matrix = SparseMatrix::from_triplets(
        t.matrix.nrows(),
        t.matrix.ncols(),
        t.matrix
            .triplets()
            .map(|(i, j, _)| (i, j, idf[j]))
            .filter(|&(_, _, v)| v > 0.0),
    )?;
    Ok((
        TagMatrix {
            matrix,
            weighting: TagWeighting::Weighted,
        },
        idf,
    ))
}

/// Parses a whitespace-separated tag query with optional `tag:weight` items.
pub fn parse_tag_query(line: &str) -> Result<Vec<(String, f64)>> {
    line.split_whitespace()
        .map(|tok| match tok.rsplit_once(':') {
            Some((tag, w)) if !tag.is_empty() => {
                let w: f64 = w
                    .parse()
                    .map_err(|_| Error::validation(format!("bad tag weight in {tok:?}")))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::validation(format!("tag weight must be nonnegative in {tok:?}")));
                }
                Ok((tag.to_string(), w))
            }
            _ => Ok((tok.to_string(), 1.0)),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryReport {
    pub dropped_tags: Vec<String>,
}

/// Sparse raw-space tag vector for a query.
///
/// Each known tag contributes its binary entry (scaled by `idf` when the
/// model was trained on tf-idf), multiplied by its query-time weight.
pub fn query_vector(
    tags: &[(String, f64)],
    vocab: &TagVocabulary,
    idf: Option<&[f64]>,
) -> (Vec<(usize, f64)>, QueryReport) {
    let mut report = QueryReport::default();
    let mut entries: HashMap<usize, f64> = HashMap::new();
    for (tag, w) in tags {
        match vocab.index_of(tag) {
            Some(j) => {
                let base = idf.map_or(1.0, |v| v[j]);
                entries.insert(j, base * w);
            }
            None => report.dropped_tags.push(tag.clone()),
        }
    }
    let mut v: Vec<(usize, f64)> = entries.into_iter().collect();
    v.sort_unstable_by_key(|e| e.0);
    (v, report)
}

/// Right singular basis of the tag matrix: `features = T · basis` equals the
/// leading columns of `U₁S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagCompression {
    /// `t × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

impl TagCompression {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn project_sparse(&self, entries: &[(usize, f64)]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.output_dim());
        for &(j, v) in entries {
            if j >= self.input_dim() {
                return Err(Error::validation(format!(
                    "tag index {j} outside vocabulary of {}",
                    self.input_dim()
                )));
            }
            out.axpy(v, &self.basis.row(j).transpose(), 1.0);
        }
        Ok(out)
    }

    pub fn project_matrix(&self, t: &SparseMatrix) -> Result<DMatrix<f64>> {
        if t.ncols() != self.input_dim() {
            return Err(Error::validation(format!(
                "tag matrix has {} columns, compression expects {}",
                t.ncols(),
                self.input_dim()
            )));
        }
        Ok(t.mul_dense(&self.basis))
    }
}

/// Truncated SVD of the uncentered tag matrix.
pub fn compress_tags(
    t: &TagMatrix,
    d: usize,
    opts: &SvdOptions,
) -> Result<(DMatrix<f64>, TagCompression)> {
    let svd = truncated_svd(&t.matrix, d, opts)?;
    let model = TagCompression {
        basis: svd.vt.transpose(),
        singular_values: svd.s,
    };
    let features = model.project_matrix(&t.matrix)?;
    Ok((features, model))
}
