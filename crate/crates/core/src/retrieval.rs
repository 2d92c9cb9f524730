//! Similarity in the latent space, the latent index, cross-modal search,
//! tag transfer, and precision metrics.
//!
//! Latent coordinates are scaled by `λᵏᵖ` per dimension and compared by
//! normalized correlation. The index stores scaled, unit-normalized vectors
//! so a dot product with a likewise prepared query is the similarity.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cca::{MultiViewModel, Projection, ViewInput};
use crate::{Error, Result};

pub const DEFAULT_POWER: f64 = 4.0;

/// Per-dimension scale `max(λ, 0)ᵖ`.
pub fn eigen_scaling(eigenvalues: &DVector<f64>, p: f64) -> DVector<f64> {
    eigenvalues.map(|l| if p == 0.0 { 1.0 } else { l.max(0.0).powf(p) })
}

/// Scales by `scale` and normalizes; `None` for a zero vector.
pub fn scale_normalize(latent: &DVector<f64>, scale: &DVector<f64>) -> Option<DVector<f64>> {
    let v = latent.component_mul(scale);
    let norm = v.norm();
    (norm > 0.0 && norm.is_finite()).then(|| v / norm)
}

/// Normalized correlation of eigenvalue-scaled projections of `x` (from
/// view `vx`) and `y` (from view `vy`).
pub fn similarity(
    model: &MultiViewModel,
    (vx, x): (usize, &ViewInput),
    (vy, y): (usize, &ViewInput),
    p: f64,
) -> Result<f64> {
    let scale = eigen_scaling(&model.eigenvalues, p);
    let a = scaled_query(model, vx, x, &scale)?;
    let b = scaled_query(model, vy, y, &scale)?;
    Ok(a.dot(&b))
}

fn scaled_query(model: &MultiViewModel, view: usize, input: &ViewInput, scale: &DVector<f64>) -> Result<DVector<f64>> {
    let Projection { latent, warning } = model.project(view, input)?;
    if let Some(w) = warning {
        return Err(Error::UndefinedSimilarity(format!("query carries no information: {w:?}")));
    }
    scale_normalize(&latent, scale)
        .ok_or_else(|| Error::UndefinedSimilarity("scaled projection has zero norm".into()))
}

/// Scoring rule in the latent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Eigenvalue scaling, then normalized correlation.
    ScaledCorrelation,
    /// Eigenvalue scaling, then negative Euclidean distance.
    ScaledEuclidean,
    /// Negative Euclidean distance of raw latent coordinates.
    Euclidean,
}

impl SimilarityMode {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityMode::ScaledCorrelation => "scale+corr",
            SimilarityMode::ScaledEuclidean => "scale+eucl",
            SimilarityMode::Euclidean => "eucl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// Hits by non-increasing score, ties by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
}

impl RankedResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// One `rank<TAB>id<TAB>score` line per hit, ranks from 1.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (r, h) in self.hits.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", r + 1, h.id, h.score));
        }
        out
    }
}

/// Metadata stored with each indexed item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemMeta {
    pub id: String,
    pub tags: Vec<String>,
    pub keywords: Vec<String>,
}

/// Exhaustive-scan index over one view's latent vectors.
#[derive(Debug, Clone)]
pub struct LatentIndex {
    pub view: usize,
    pub p: f64,
    items: Vec<ItemMeta>,
    /// Unscaled latent rows, kept for the Euclidean ablations.
    raw: DMatrix<f64>,
    /// Scaled, unit-norm rows; zero for excluded items.
    normalized: DMatrix<f64>,
    excluded: Vec<bool>,
    scale: DVector<f64>,
}

impl LatentIndex {
    /// Builds an index from latent rows already projected through `view`.
    pub fn from_latent(model: &MultiViewModel, view: usize, items: Vec<ItemMeta>, latent: DMatrix<f64>, p: f64) -> Result<Self> {
        if latent.nrows() != items.len() {
            return Err(Error::validation(format!(
                "{} latent rows for {} items",
                latent.nrows(),
                items.len()
            )));
        }
        if latent.ncols() != model.dim() {
            return Err(Error::validation(format!(
                "latent rows have {} columns, model has {}",
                latent.ncols(),
                model.dim()
            )));
        }
        if !(p >= 0.0) {
            return Err(Error::validation(format!("scaling power must be nonnegative, got {p}")));
        }
        Self::with_scale(view, items, latent, eigen_scaling(&model.eigenvalues, p), p)
    }

    /// Index over arbitrary embeddings with an explicit per-dimension scale.
    pub fn with_scale(view: usize, items: Vec<ItemMeta>, latent: DMatrix<f64>, scale: DVector<f64>, p: f64) -> Result<Self> {
        if latent.nrows() != items.len() || latent.ncols() != scale.len() {
            return Err(Error::validation(format!(
                "{}x{} embeddings for {} items and {} scale entries",
                latent.nrows(),
                latent.ncols(),
                items.len(),
                scale.len()
            )));
        }
        let mut normalized = DMatrix::zeros(latent.nrows(), latent.ncols());
        let mut excluded = vec![false; latent.nrows()];
        for i in 0..latent.nrows() {
            match scale_normalize(&latent.row(i).transpose(), &scale) {
                Some(v) => normalized.row_mut(i).copy_from(&v.transpose()),
                None => excluded[i] = true,
            }
        }
        if excluded.iter().any(|&e| e) {
            log::warn!(
                "{} items have zero scaled projections and are excluded from results",
                excluded.iter().filter(|&&e| e).count()
            );
        }
        Ok(LatentIndex {
            view,
            p,
            items,
            raw: latent,
            normalized,
            excluded,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ItemMeta] {
        &self.items
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    /// Top `k` by similarity to a raw latent query vector.
    pub fn search_latent(&self, latent: &DVector<f64>, k: usize, mode: SimilarityMode) -> Result<RankedResult> {
        let q = DMatrix::from_row_slice(1, latent.len(), latent.as_slice());
        Ok(self.search_batch(&q, k, mode)?.pop().expect("one query"))
    }

    /// Top `k` for each row of `queries` (raw latent coordinates).
    pub fn search_batch(&self, queries: &DMatrix<f64>, k: usize, mode: SimilarityMode) -> Result<Vec<RankedResult>> {
        if k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if queries.ncols() != self.scale.len() {
            return Err(Error::validation(format!(
                "queries have {} dimensions, index has {}",
                queries.ncols(),
                self.scale.len()
            )));
        }
        let scores = match mode {
            SimilarityMode::ScaledCorrelation => {
                let mut prepared = DMatrix::zeros(queries.nrows(), queries.ncols());
                for i in 0..queries.nrows() {
                    let v = scale_normalize(&queries.row(i).transpose(), &self.scale).ok_or_else(|| {
                        Error::UndefinedSimilarity(format!("query {i} has a zero scaled projection"))
                    })?;
                    prepared.row_mut(i).copy_from(&v.transpose());
                }
                &prepared * self.normalized.transpose()
            }
            SimilarityMode::ScaledEuclidean | SimilarityMode::Euclidean => {
                let scale = if mode == SimilarityMode::ScaledEuclidean {
                    self.scale.clone()
                } else {
                    DVector::from_element(self.scale.len(), 1.0)
                };
                let mut q = queries.clone();
                let mut db = self.raw.clone();
                for mut row in q.row_iter_mut() {
                    row.component_mul_assign(&scale.transpose());
                }
                for mut row in db.row_iter_mut() {
                    row.component_mul_assign(&scale.transpose());
                }
                let qn: Vec<f64> = q.row_iter().map(|r| r.norm_squared()).collect();
                let dn: Vec<f64> = db.row_iter().map(|r| r.norm_squared()).collect();
                let mut s = &q * db.transpose();
                for i in 0..s.nrows() {
                    for j in 0..s.ncols() {
                        s[(i, j)] = -(qn[i] + dn[j] - 2.0 * s[(i, j)]).max(0.0).sqrt();
                    }
                }
                s
            }
        };
        Ok((0..scores.nrows())
            .map(|i| self.top_k(scores.row(i).iter().copied(), k))
            .collect())
    }

    fn top_k(&self, scores: impl Iterator<Item = f64>, k: usize) -> RankedResult {
        let mut cand: Vec<(usize, f64)> = scores
            .enumerate()
            .filter(|&(i, _)| !self.excluded[i])
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1)
                .then_with(|| self.items[a.0].id.cmp(&self.items[b.0].id))
        };
        let k = k.min(cand.len());
        if k > 0 && k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        RankedResult {
            hits: cand
                .into_iter()
                .map(|(i, s)| Hit {
                    id: self.items[i].id.clone(),
                    score: s,
                })
                .collect(),
        }
    }
}

/// Projects each item through `view` and indexes it.
pub fn build_index(
    model: &MultiViewModel,
    view: usize,
    items: Vec<(ItemMeta, ViewInput)>,
    p: f64,
) -> Result<LatentIndex> {
    let mut latent = DMatrix::zeros(items.len(), model.dim());
    let mut metas = Vec::with_capacity(items.len());
    for (i, (meta, input)) in items.into_iter().enumerate() {
        let proj = model.project(view, &input)?;
        latent.row_mut(i).copy_from(&proj.latent.transpose());
        metas.push(meta);
    }
    LatentIndex::from_latent(model, view, metas, latent, p)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchReport {
    pub dropped_tags: Vec<String>,
}

/// Multiplies the named tags of a tag query by their weights.
pub fn apply_tag_weights(input: &ViewInput, weights: &HashMap<String, f64>) -> Result<ViewInput> {
    match input {
        ViewInput::Tags(tags) => Ok(ViewInput::Tags(
            tags.iter()
                .map(|(t, w)| (t.clone(), w * weights.get(t).copied().unwrap_or(1.0)))
                .collect(),
        )),
        _ => Err(Error::validation("tag weights apply only to tag queries")),
    }
}

/// Exact top-`k` search of `index` for one raw query from `view`.
pub fn query(
    index: &LatentIndex,
    model: &MultiViewModel,
    view: usize,
    input: &ViewInput,
    k: usize,
    tag_weights: Option<&HashMap<String, f64>>,
) -> Result<(RankedResult, SearchReport)> {
    let weighted;
    let input = match tag_weights {
        Some(w) => {
            weighted = apply_tag_weights(input, w)?;
            &weighted
        }
        None => input,
    };
    let Projection { latent, warning } = model.project(view, input)?;
    let mut report = SearchReport::default();
    if let Some(w) = warning {
        let crate::cca::ProjectionWarning::NoKnownTerms { dropped } = &w;
        report.dropped_tags = dropped.clone();
        return Err(Error::UndefinedSimilarity(format!(
            "query has no known terms (dropped: {})",
            dropped.join(" ")
        )));
    }
    if let ViewInput::Tags(tags) = input {
        if let Some(crate::cca::ViewDescriptor::Tags { vocab, .. }) = model.views.get(view).map(|v| &v.descriptor) {
            report.dropped_tags = tags
                .iter()
                .filter(|(t, _)| vocab.index_of(t).is_none())
                .map(|(t, _)| t.clone())
                .collect();
        }
    }
    let result = index.search_latent(&latent, k, SimilarityMode::ScaledCorrelation)?;
    Ok((result, report))
}

/// Most frequent tags among the neighbors; ties alphabetical.
pub fn transfer_tags<'a>(neighbor_tags: impl IntoIterator<Item = &'a [String]>, n_tags: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tags in neighbor_tags {
        let unique: HashSet<&str> = tags.iter().map(String::as_str).collect();
        for t in unique {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(n_tags).map(|(t, _)| t.to_string()).collect()
}

/// Tags for a query from the `n_neighbors` nearest indexed items, already
/// projected to `latent`.
pub fn annotate_latent(index: &LatentIndex, latent: &DVector<f64>, n_neighbors: usize, n_tags: usize) -> Result<Vec<String>> {
    if index.is_empty() {
        return Err(Error::validation("cannot annotate from an empty index"));
    }
    let hits = index.search_latent(latent, n_neighbors, SimilarityMode::ScaledCorrelation)?;
    let pos: HashMap<&str, usize> = index.items.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect();
    Ok(transfer_tags(
        hits.ids().map(|id| index.items[pos[id]].tags.as_slice()),
        n_tags,
    ))
}

/// Image-to-tag transfer: project the query image and count tags over its
/// nearest neighbors in `index`.
pub fn annotate(
    index: &LatentIndex,
    model: &MultiViewModel,
    query_view: usize,
    query_input: &ViewInput,
    n_neighbors: usize,
    n_tags: usize,
) -> Result<Vec<String>> {
    if index.is_empty() {
        return Err(Error::validation("cannot annotate from an empty index"));
    }
    let proj = model.project(query_view, query_input)?;
    annotate_latent(index, &proj.latent, n_neighbors, n_tags)
}

/// Precision over the leading `p` results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub value: f64,
    /// Set when fewer than `p` results were available and the shorter
    /// list was scored.
    pub short: bool,
}

pub fn precision_at_p(result: &RankedResult, relevant: &HashSet<String>, p: usize) -> Precision {
    let used = p.min(result.len());
    if used == 0 {
        return Precision { value: 0.0, short: p > 0 };
    }
    let hits = result.ids().take(used).filter(|id| relevant.contains(*id)).count();
    Precision {
        value: hits as f64 / used as f64,
        short: used < p,
    }
}

/// `a / (p q)` with `a` the number of (item, query keyword) hits over the
/// leading `p` items and `q` the number of query keywords.
pub fn per_keyword_precision_at_p(
    result: &RankedResult,
    query_keywords: &HashSet<String>,
    item_keywords: &HashMap<String, HashSet<String>>,
    p: usize,
) -> Result<f64> {
    let q = query_keywords.len();
    if q == 0 {
        return Err(Error::validation("per-keyword precision needs at least one query keyword"));
    }
    let used = p.min(result.len());
    if used == 0 {
        return Ok(0.0);
    }
    let a: usize = result
        .ids()
        .take(used)
        .map(|id| {
            item_keywords
                .get(id)
                .map_or(0, |kws| query_keywords.iter().filter(|k| kws.contains(*k)).count())
        })
        .sum();
    Ok(a as f64 / (used * q) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{fit_cca, CcaOptions, ViewRole, ViewSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn model(seed: u64) -> (MultiViewModel, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(150, 5, |_, _| StandardNormal.sample(&mut rng));
        let noise = DMatrix::from_fn(150, 4, |_, _| StandardNormal.sample(&mut rng));
        let mix = DMatrix::from_fn(5, 4, |_, _| StandardNormal.sample(&mut rng));
        let y = &x * mix + noise;
        let views = ViewSet::from_matrices(vec![(ViewRole::Visual, x.clone()), (ViewRole::Text, y.clone())]).unwrap();
        (fit_cca(&views, 4, &CcaOptions::default()).unwrap(), x, y)
    }

    fn row(m: &DMatrix<f64>, i: usize) -> ViewInput {
        ViewInput::Features(m.row(i).iter().copied().collect())
    }

    fn ids(n: usize) -> Vec<ItemMeta> {
        (0..n)
            .map(|i| ItemMeta {
                id: format!("item{i:05}"),
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn self_similarity_and_symmetry() {
        let (m, x, y) = model(1);
        let s = similarity(&m, (0, &row(&x, 3)), (0, &row(&x, 3)), 4.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let a = similarity(&m, (0, &row(&x, 3)), (1, &row(&y, 8)), 4.0).unwrap();
        let b = similarity(&m, (1, &row(&y, 8)), (0, &row(&x, 3)), 4.0).unwrap();
        assert_eq!(a, b);
        // Mirror x around the mean so the centered projection flips sign.
        let mirrored: Vec<f64> = (0..5).map(|j| 2.0 * m.means[0][j] - x[(3, j)]).collect();
        let s = similarity(&m, (0, &row(&x, 3)), (0, &ViewInput::Features(mirrored)), 4.0).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
        let at_mean = ViewInput::Features(m.means[0].iter().copied().collect());
        assert!(matches!(
            similarity(&m, (0, &at_mean), (0, &row(&x, 0)), 4.0),
            Err(Error::UndefinedSimilarity(_))
        ));
    }

    #[test]
    fn matches_step_by_step_formula() {
        let (m, x, y) = model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let i = rng.random_range(0..150);
            let j = rng.random_range(0..150);
            let px = (x.row(i) - m.means[0].transpose()) * &m.projections[0];
            let py = (y.row(j) - m.means[1].transpose()) * &m.projections[1];
            let dscale: Vec<f64> = m.eigenvalues.iter().map(|l| l.powi(4)).collect();
            let sx: Vec<f64> = px.iter().zip(&dscale).map(|(a, b)| a * b).collect();
            let sy: Vec<f64> = py.iter().zip(&dscale).map(|(a, b)| a * b).collect();
            let dot: f64 = sx.iter().zip(&sy).map(|(a, b)| a * b).sum();
            let nx: f64 = sx.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny: f64 = sy.iter().map(|a| a * a).sum::<f64>().sqrt();
            let want = dot / (nx * ny);
            let got = similarity(&m, (0, &row(&x, i)), (1, &row(&y, j)), 4.0).unwrap();
            assert!((got - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn power_zero_is_plain_cosine() {
        let (m, x, _) = model(4);
        let px = m.project_features(0, &x).unwrap();
        let a = px.row(1).transpose();
        let b = px.row(2).transpose();
        let cosine = a.dot(&b) / (a.norm() * b.norm());
        let got = similarity(&m, (0, &row(&x, 1)), (0, &row(&x, 2)), 0.0).unwrap();
        assert!((got - cosine).abs() < 1e-12);
    }

    #[test]
    fn index_agrees_with_pairwise_similarity() {
        let (m, x, _) = model(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let big = DMatrix::from_fn(1000, 5, |_, _| rng.random_range(-2.0..2.0));
        let items: Vec<(ItemMeta, ViewInput)> = ids(1000).into_iter().zip((0..1000).map(|i| row(&big, i))).collect();
        let index = build_index(&m, 0, items, 4.0).unwrap();
        assert_eq!(index.len(), 1000);
        for r in index.normalized().row_iter() {
            assert!((r.norm() - 1.0).abs() <= 1e-10);
        }
        for qi in [0, 5, 77] {
            let q = row(&x, qi);
            let (result, _) = query(&index, &m, 0, &q, 10, None).unwrap();
            let mut brute: Vec<(String, f64)> = (0..1000)
                .map(|i| (format!("item{i:05}"), similarity(&m, (0, &q), (0, &row(&big, i)), 4.0).unwrap()))
                .collect();
            brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            for (hit, (id, s)) in result.hits.iter().zip(&brute) {
                assert_eq!(&hit.id, id);
                assert!((hit.score - s).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn stored_item_is_its_own_best_match() {
        let (m, x, _) = model(7);
        let items: Vec<(ItemMeta, ViewInput)> = ids(150).into_iter().zip((0..150).map(|i| row(&x, i))).collect();
        let index = build_index(&m, 0, items, 4.0).unwrap();
        let (r, _) = query(&index, &m, 0, &row(&x, 42), 1, None).unwrap();
        assert_eq!(r.hits[0].id, "item00042");
        assert!((r.hits[0].score - 1.0).abs() < 1e-12);
        assert!(r.hits.iter().all(|h| h.score <= 1.0 + 1e-12 && h.score >= -1.0 - 1e-12));
        // Positive rescaling of the centered query keeps the ranking.
        let scaled: Vec<f64> = (0..5).map(|j| m.means[0][j] + 3.0 * (x[(42, j)] - m.means[0][j])).collect();
        let (r2, _) = query(&index, &m, 0, &ViewInput::Features(scaled), 20, None).unwrap();
        let (r1, _) = query(&index, &m, 0, &row(&x, 42), 20, None).unwrap();
        assert_eq!(r1.ids().collect::<Vec<_>>(), r2.ids().collect::<Vec<_>>());
    }

    #[test]
    fn zero_items_are_excluded() {
        let (m, x, _) = model(8);
        let mut latent = m.project_features(0, &x.rows(0, 3).into_owned()).unwrap();
        latent.row_mut(1).fill(0.0);
        let index = LatentIndex::from_latent(&m, 0, ids(3), latent, 4.0).unwrap();
        assert!(index.is_excluded(1));
        let r = index.search_latent(&m.project_features(0, &x.rows(0, 1).into_owned()).unwrap().row(0).transpose(), 3, SimilarityMode::ScaledCorrelation).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.ids().all(|id| id != "item00001"));
    }

    #[test]
    fn ties_break_by_id() {
        let (m, _, _) = model(9);
        let latent = DMatrix::from_fn(3, 4, |_, j| (j + 1) as f64);
        let metas = vec!["b", "c", "a"]
            .into_iter()
            .map(|s| ItemMeta { id: s.into(), ..Default::default() })
            .collect();
        let index = LatentIndex::from_latent(&m, 0, metas, latent.clone(), 4.0).unwrap();
        let r = index.search_latent(&latent.row(0).transpose(), 3, SimilarityMode::ScaledCorrelation).unwrap();
        assert_eq!(r.ids().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn annotation_counting() {
        let cat = vec!["cat".to_string()];
        let cute = vec!["cat".to_string(), "cute".to_string()];
        let mut lists: Vec<&[String]> = vec![cat.as_slice(); 30];
        lists.extend(vec![cute.as_slice(); 20]);
        assert_eq!(transfer_tags(lists.clone(), 2), vec!["cat", "cute"]);
        assert_eq!(transfer_tags(lists.clone(), 1), vec!["cat"]);
        assert_eq!(transfer_tags(lists, 5), vec!["cat", "cute"]);
        let dog = vec!["dog".to_string()];
        assert_eq!(transfer_tags(vec![dog.as_slice(); 50], 5), vec!["dog"]);
        let ab = vec!["b".to_string(), "a".to_string()];
        assert_eq!(transfer_tags(vec![ab.as_slice()], 1), vec!["a"]);
    }

    #[test]
    fn precision_metrics() {
        let r = RankedResult {
            hits: (0..20).map(|i| Hit { id: format!("i{i}"), score: 1.0 }).collect(),
        };
        let all: HashSet<String> = (0..20).map(|i| format!("i{i}")).collect();
        assert_eq!(precision_at_p(&r, &all, 20).value, 1.0);
        assert_eq!(precision_at_p(&r, &HashSet::new(), 20).value, 0.0);
        let half: HashSet<String> = (0..10).map(|i| format!("i{i}")).collect();
        assert_eq!(precision_at_p(&r, &half, 20).value, 0.5);
        let short = precision_at_p(&r, &all, 30);
        assert!(short.short && short.value == 1.0);

        let q: HashSet<String> = ["sky".to_string(), "water".to_string()].into();
        let mut kw: HashMap<String, HashSet<String>> = HashMap::new();
        for i in 0..20 {
            let s: HashSet<String> = if i < 10 { ["sky".to_string()].into() } else { HashSet::new() };
            kw.insert(format!("i{i}"), s);
        }
        assert_eq!(per_keyword_precision_at_p(&r, &q, &kw, 20).unwrap(), 0.25);
        for v in kw.values_mut() {
            *v = q.clone();
        }
        assert_eq!(per_keyword_precision_at_p(&r, &q, &kw, 20).unwrap(), 1.0);
        for v in kw.values_mut() {
            v.clear();
        }
        assert_eq!(per_keyword_precision_at_p(&r, &q, &kw, 20).unwrap(), 0.0);
        assert!(per_keyword_precision_at_p(&r, &HashSet::new(), &kw, 20).is_err());
    }
}
