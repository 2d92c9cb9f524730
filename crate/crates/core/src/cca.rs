//! Multi-view CCA over explicitly mapped features.
//!
//! For views `X₁ … X_m` (centered) the covariance blocks
//! `Sᵢⱼ = XᵢᵀXⱼ / n` form a full block matrix `A`; its block diagonal, with
//! `ε` added to every diagonal entry, is `B`. The top `d` solutions of
//! `A w = λ B w` are sliced per view into projections `Wᵢ`, and any single
//! view embeds on its own as `(x − meanᵢ) Wᵢ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kernel_maps::FeatureAssembly;
use crate::linalg::{center_columns, ensure_finite, sym_generalized_eig, EigOptions};
use crate::semantics::IndicatorKind;
use crate::text_view::{query_vector, TagCompression, TagVocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewRole {
    Visual,
    Text,
    Semantic,
}

impl ViewRole {
    pub fn name(self) -> &'static str {
        match self {
            ViewRole::Visual => "visual",
            ViewRole::Text => "text",
            ViewRole::Semantic => "semantic",
        }
    }
}

/// How raw single-view input becomes the feature row the model was fit on.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewDescriptor {
    /// Kernel-mapped, PCA-reduced, concatenated visual blocks.
    Assembly(FeatureAssembly),
    /// Binary (or tf-idf) tag vector compressed by the tag SVD basis.
    Tags {
        vocab: TagVocabulary,
        idf: Option<Vec<f64>>,
        compression: TagCompression,
    },
    /// Indicator rows used as is; `labels` names the columns.
    Indicator { labels: Vec<String>, kind: IndicatorKind },
    /// Features supplied already preprocessed.
    Passthrough { dim: usize },
}

/// Raw input for one item in one view.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewInput {
    /// One raw vector per visual feature block.
    Blocks(Vec<Vec<f64>>),
    /// Tags with query-time weights (1.0 for a plain tag).
    Tags(Vec<(String, f64)>),
    /// Keyword or cluster names for an indicator view.
    Labels(Vec<String>),
    /// Already preprocessed feature row.
    Features(Vec<f64>),
}

impl ViewInput {
    pub fn tags<S: AsRef<str>>(tags: &[S]) -> Self {
        ViewInput::Tags(tags.iter().map(|t| (t.as_ref().to_string(), 1.0)).collect())
    }
}

/// Raised alongside a projection when the input carried no information.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionWarning {
    /// Every tag or label was unknown (or none were given).
    NoKnownTerms { dropped: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub latent: DVector<f64>,
    pub warning: Option<ProjectionWarning>,
}

impl ViewDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            ViewDescriptor::Assembly(a) => a.output_dim(),
            ViewDescriptor::Tags { compression, .. } => compression.output_dim(),
            ViewDescriptor::Indicator { labels, .. } => labels.len(),
            ViewDescriptor::Passthrough { dim } => *dim,
        }
    }

    /// Preprocesses one raw input into a feature row.
    pub fn featurize(&self, input: &ViewInput) -> Result<(DVector<f64>, Option<ProjectionWarning>)> {
        match (self, input) {
            (ViewDescriptor::Assembly(a), ViewInput::Blocks(blocks)) => Ok((a.transform_row(blocks)?, None)),
            (ViewDescriptor::Tags { vocab, idf, compression }, ViewInput::Tags(tags)) => {
                let (entries, report) = query_vector(tags, vocab, idf.as_deref());
                let warning = entries
                    .iter()
                    .all(|&(_, v)| v == 0.0)
                    .then(|| ProjectionWarning::NoKnownTerms {
                        dropped: report.dropped_tags.clone(),
                    });
                Ok((compression.project_sparse(&entries)?, warning))
            }
            (ViewDescriptor::Indicator { labels, .. }, ViewInput::Labels(given)) => {
                let mut v = DVector::zeros(labels.len());
                for g in given {
                    let j = labels
                        .iter()
                        .position(|l| l == g)
                        .ok_or_else(|| Error::validation(format!("unknown label {g:?}")))?;
                    v[j] = 1.0;
                }
                let warning = given.is_empty().then(|| ProjectionWarning::NoKnownTerms { dropped: Vec::new() });
                Ok((v, warning))
            }
            (d, ViewInput::Features(f)) => {
                if f.len() != d.dim() {
                    return Err(Error::validation(format!(
                        "feature row has length {}, view expects {}",
                        f.len(),
                        d.dim()
                    )));
                }
                Ok((DVector::from_column_slice(f), None))
            }
            (d, other) => Err(Error::validation(format!(
                "input {} does not fit a {} view",
                input_kind(other),
                descriptor_kind(d)
            ))),
        }
    }
}

fn input_kind(i: &ViewInput) -> &'static str {
    match i {
        ViewInput::Blocks(_) => "blocks",
        ViewInput::Tags(_) => "tags",
        ViewInput::Labels(_) => "labels",
        ViewInput::Features(_) => "features",
    }
}

fn descriptor_kind(d: &ViewDescriptor) -> &'static str {
    match d {
        ViewDescriptor::Assembly(_) => "visual assembly",
        ViewDescriptor::Tags { .. } => "tag",
        ViewDescriptor::Indicator { .. } => "indicator",
        ViewDescriptor::Passthrough { .. } => "passthrough",
    }
}

/// Role and preprocessing of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub role: ViewRole,
    pub descriptor: ViewDescriptor,
}

/// A view's preprocessed training matrix with its spec.
#[derive(Debug, Clone)]
pub struct View {
    pub spec: ViewSpec,
    pub features: DMatrix<f64>,
}

impl View {
    pub fn passthrough(role: ViewRole, features: DMatrix<f64>) -> Self {
        View {
            spec: ViewSpec {
                role,
                descriptor: ViewDescriptor::Passthrough { dim: features.ncols() },
            },
            features,
        }
    }
}

/// Aligned views over the same `n` items.
#[derive(Debug, Clone)]
pub struct ViewSet {
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn new(views: Vec<View>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::validation("a view set needs at least one view"));
        }
        let n = views[0].features.nrows();
        for (i, v) in views.iter().enumerate() {
            if v.features.nrows() != n {
                return Err(Error::validation(format!(
                    "view {i} has {} rows, view 0 has {n}",
                    v.features.nrows()
                )));
            }
            if v.features.ncols() != v.spec.descriptor.dim() {
                return Err(Error::validation(format!(
                    "view {i} has {} columns but its descriptor produces {}",
                    v.features.ncols(),
                    v.spec.descriptor.dim()
                )));
            }
        }
        Ok(ViewSet { views })
    }

    pub fn from_matrices(matrices: Vec<(ViewRole, DMatrix<f64>)>) -> Result<Self> {
        ViewSet::new(matrices.into_iter().map(|(r, m)| View::passthrough(r, m)).collect())
    }

    pub fn n_items(&self) -> usize {
        self.views[0].features.nrows()
    }

    pub fn total_dim(&self) -> usize {
        self.views.iter().map(|v| v.features.ncols()).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CcaOptions {
    /// Added to the diagonal of every covariance block of `B`.
    pub epsilon: f64,
    pub eig: EigOptions,
}

impl Default for CcaOptions {
    fn default() -> Self {
        CcaOptions {
            epsilon: 1e-4,
            eig: EigOptions::default(),
        }
    }
}

/// A fitted multi-view embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewModel {
    pub views: Vec<ViewSpec>,
    /// `Wᵢ`, `dᵢ × d` each.
    pub projections: Vec<DMatrix<f64>>,
    /// Training means of each preprocessed view.
    pub means: Vec<DVector<f64>>,
    /// Descending.
    pub eigenvalues: DVector<f64>,
    pub epsilon: f64,
}

impl MultiViewModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_index(&self, role: ViewRole) -> Option<usize> {
        self.views.iter().position(|v| v.role == role)
    }

    fn check_view(&self, view: usize) -> Result<()> {
        if view >= self.n_views() {
            return Err(Error::validation(format!(
                "view {view} out of range for a {}-view model",
                self.n_views()
            )));
        }
        Ok(())
    }

    /// Leading `d` latent dimensions of this model.
    pub fn truncated(&self, d: usize) -> Result<MultiViewModel> {
        if d == 0 || d > self.dim() {
            return Err(Error::validation(format!(
                "cannot truncate a {}-dimensional model to {d}",
                self.dim()
            )));
        }
        Ok(MultiViewModel {
            views: self.views.clone(),
            projections: self.projections.iter().map(|w| w.columns(0, d).into_owned()).collect(),
            means: self.means.clone(),
            eigenvalues: self.eigenvalues.rows(0, d).into_owned(),
            epsilon: self.epsilon,
        })
    }

    /// Latent coordinates of already preprocessed rows of one view.
    pub fn project_features(&self, view: usize, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_view(view)?;
        let mean = &self.means[view];
        if features.ncols() != mean.len() {
            return Err(Error::validation(format!(
                "view {view} expects {} features, got {}",
                mean.len(),
                features.ncols()
            )));
        }
        let mut centered = features.clone();
        let mt = mean.transpose();
        for mut row in centered.row_iter_mut() {
            row -= &mt;
        }
        Ok(centered * &self.projections[view])
    }

    /// Embeds one raw single-view input; the other views are not needed.
    pub fn project(&self, view: usize, input: &ViewInput) -> Result<Projection> {
        self.check_view(view)?;
        let (row, warning) = self.views[view].descriptor.featurize(input)?;
        let latent = self.project_features(view, &DMatrix::from_row_slice(1, row.len(), row.as_slice()))?;
        Ok(Projection {
            latent: latent.row(0).transpose(),
            warning,
        })
    }
}

/// Fits a `d`-dimensional embedding of the views.
pub fn fit_cca(views: &ViewSet, d: usize, opts: &CcaOptions) -> Result<MultiViewModel> {
    if views.views.len() < 2 {
        return Err(Error::validation("CCA needs at least two views"));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::validation(format!("regularization must be positive, got {}", opts.epsilon)));
    }
    let n = views.n_items();
    let dims: Vec<usize> = views.views.iter().map(|v| v.features.ncols()).collect();
    let total: usize = dims.iter().sum();
    if d == 0 || d > total {
        return Err(Error::validation(format!(
            "embedding dimension {d} must lie in 1..={total}"
        )));
    }
    if n < 2 {
        return Err(Error::validation("CCA needs at least two items"));
    }
    if let Some(&max_dim) = dims.iter().max() {
        if n <= max_dim {
            log::warn!("only {n} items for a view of dimension {max_dim}; covariance is rank deficient");
        }
    }

    let mut stacked = DMatrix::zeros(n, total);
    let mut means = Vec::with_capacity(dims.len());
    let mut offsets = Vec::with_capacity(dims.len());
    let mut at = 0;
    for (i, v) in views.views.iter().enumerate() {
        ensure_finite(&v.features, &format!("view {i}"))?;
        let (centered, mean) = center_columns(&v.features);
        stacked.columns_mut(at, dims[i]).copy_from(&centered);
        means.push(mean);
        offsets.push(at);
        at += dims[i];
    }

    let mut a = stacked.tr_mul(&stacked) / n as f64;
    // Exact symmetry; the product is symmetric up to rounding only.
    a = (&a + a.transpose()) * 0.5;
    let mut b = DMatrix::zeros(total, total);
    for (&off, &dim) in offsets.iter().zip(&dims) {
        b.view_mut((off, off), (dim, dim)).copy_from(&a.view((off, off), (dim, dim)));
        for k in 0..dim {
            b[(off + k, off + k)] += opts.epsilon;
        }
    }
    let eig = sym_generalized_eig(&a, &b, d, &opts.eig)?;
    let projections = offsets
        .iter()
        .zip(&dims)
        .map(|(&off, &dim)| eig.vectors.rows(off, dim).into_owned())
        .collect();
    Ok(MultiViewModel {
        views: views.views.iter().map(|v| v.spec.clone()).collect(),
        projections,
        means,
        eigenvalues: eig.values,
        epsilon: opts.epsilon,
    })
}

/// Scores a candidate model on held-out queries.
pub trait ValidationProtocol {
    /// Number of validation queries.
    fn n_queries(&self) -> usize;
    /// Validation precision of `model` (higher is better).
    fn score(&self, model: &MultiViewModel) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct DimensionChoice {
    pub d: usize,
    /// `(candidate d, validation score)` in the order evaluated.
    pub scores: Vec<(usize, f64)>,
    /// The model truncated to the chosen `d`.
    pub model: MultiViewModel,
}

pub const DEFAULT_DIMENSION_CANDIDATES: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];

/// Picks `d` from the candidates by validation score, ties to the smaller.
///
/// One model is fit at the largest candidate (capped to the total view
/// dimension) and smaller candidates are its leading columns.
pub fn select_dimension(
    views: &ViewSet,
    candidates: &[usize],
    opts: &CcaOptions,
    protocol: &dyn ValidationProtocol,
) -> Result<DimensionChoice> {
    if protocol.n_queries() == 0 {
        return Err(Error::validation("dimension selection needs validation queries"));
    }
    let full = fit_selection_model(views, candidates, opts)?;
    select_from_model(&full, candidates, protocol)
}

/// The single fit `select_dimension` slices from.
pub fn fit_selection_model(views: &ViewSet, candidates: &[usize], opts: &CcaOptions) -> Result<MultiViewModel> {
    let cap = views.total_dim();
    let max = candidates
        .iter()
        .map(|&c| c.min(cap))
        .max()
        .ok_or_else(|| Error::validation("no candidate dimensions"))?;
    fit_cca(views, max, opts)
}

/// Selection over leading columns of an already fitted model.
pub fn select_from_model(
    full: &MultiViewModel,
    candidates: &[usize],
    protocol: &dyn ValidationProtocol,
) -> Result<DimensionChoice> {
    if protocol.n_queries() == 0 {
        return Err(Error::validation("dimension selection needs validation queries"));
    }
    let mut ds: Vec<usize> = candidates.iter().map(|&c| c.min(full.dim())).filter(|&c| c > 0).collect();
    ds.sort_unstable();
    ds.dedup();
    if ds.is_empty() {
        return Err(Error::validation("no candidate dimensions"));
    }
    let mut scores = Vec::with_capacity(ds.len());
    let mut best: Option<(usize, f64)> = None;
    for &d in &ds {
        let s = protocol.score(&full.truncated(d)?)?;
        scores.push((d, s));
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((d, s));
        }
    }
    let (d, _) = best.expect("non-empty candidates");
    Ok(DimensionChoice {
        d,
        scores,
        model: full.truncated(d)?,
    })
}
