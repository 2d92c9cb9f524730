//! Fitting the per-view preprocessing and assembling view sets.

use std::collections::{BTreeSet, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cca::{View, ViewDescriptor, ViewRole, ViewSet, ViewSpec};
use crate::kernel_maps::{assemble_features_with_dims, AssemblyOptions, FeatureAssembly, MapKind};
use crate::linalg::SvdOptions;
use crate::semantics::{
    kmeans, nmf_cluster, normalized_cut_cluster, plsa_cluster, supervised_indicator, to_indicator, ClusterAssignment,
    IndicatorMatrix, KMeansOptions, NcutOptions, NmfOptions, PlsaOptions,
};
use crate::text_view::{
    build_vocabulary, compress_tags, tfidf_weight, vectorize, TagCompression, TagMatrix, TagVocabulary,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualConfig {
    /// One map per block; blocks beyond the list use RFF with `rff_dim`.
    pub maps: Vec<MapKind>,
    pub rff_dim: usize,
    /// Per-block PCA dimension, capped at each block's mapped dimension.
    pub pca_dim: usize,
    pub sigma_neighbors: usize,
    pub sigma_sample: usize,
    pub seed: u64,
}

impl Default for VisualConfig {
    fn default() -> Self {
        VisualConfig {
            maps: Vec::new(),
            rff_dim: 1024,
            pca_dim: 500,
            sigma_neighbors: 50,
            sigma_sample: 2000,
            seed: 0,
        }
    }
}

impl VisualConfig {
    pub fn maps_for(&self, blocks: usize) -> Vec<MapKind> {
        (0..blocks)
            .map(|b| {
                self.maps.get(b).cloned().unwrap_or(MapKind::Rff {
                    output_dim: self.rff_dim,
                    sigma: None,
                    seed: self.seed.wrapping_add(b as u64),
                })
            })
            .collect()
    }
}

/// Fits kernel maps and PCA on training blocks.
pub fn fit_visual(blocks: &[DMatrix<f64>], cfg: &VisualConfig) -> Result<(DMatrix<f64>, FeatureAssembly)> {
    let kinds = cfg.maps_for(blocks.len());
    let n = blocks.first().map_or(0, |b| b.nrows());
    let dims: Vec<usize> = blocks
        .iter()
        .zip(&kinds)
        .map(|(b, k)| {
            let mapped = match k {
                MapKind::Rff { output_dim, .. } => *output_dim,
                MapKind::Sqrt | MapKind::Identity => b.ncols(),
            };
            cfg.pca_dim.min(mapped).min(n)
        })
        .collect();
    let opts = AssemblyOptions {
        sigma_neighbors: cfg.sigma_neighbors,
        sigma_sample: cfg.sigma_sample,
        sigma_seed: cfg.seed,
    };
    assemble_features_with_dims(blocks, &kinds, &dims, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TagConfig {
    pub min_count: usize,
    pub max_terms: Option<usize>,
    pub stopwords: Vec<String>,
    pub tfidf: bool,
    /// Compressed dimension, capped at the vocabulary size.
    pub dim: usize,
    pub oversampling: usize,
    pub power_iters: usize,
    /// Relative residual at which subspace iteration stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            min_count: 1,
            max_terms: None,
            stopwords: Vec::new(),
            tfidf: false,
            dim: 500,
            oversampling: 10,
            power_iters: 2,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Everything needed to turn a tag list into the compressed tag features.
#[derive(Debug, Clone, PartialEq)]
pub struct TagView {
    pub vocab: TagVocabulary,
    pub idf: Option<Vec<f64>>,
    pub compression: TagCompression,
}

impl TagView {
    pub fn descriptor(&self) -> ViewDescriptor {
        ViewDescriptor::Tags {
            vocab: self.vocab.clone(),
            idf: self.idf.clone(),
            compression: self.compression.clone(),
        }
    }

    /// Binary tag matrix and compressed features for new documents.
    pub fn features(&self, docs: &[Vec<String>]) -> Result<(TagMatrix, DMatrix<f64>)> {
        let (binary, _) = vectorize(docs, &self.vocab);
        let weighted = match &self.idf {
            Some(idf) => {
                let mut m = binary.clone();
                m.matrix = binary.matrix.map_values(|_, j, v| v * idf[j]);
                m
            }
            None => binary.clone(),
        };
        let features = self.compression.project_matrix(&weighted.matrix)?;
        Ok((binary, features))
    }
}

pub fn build_vocab(docs: &[Vec<String>], cfg: &TagConfig) -> Result<TagVocabulary> {
    let stop: HashSet<String> = cfg.stopwords.iter().cloned().collect();
    build_vocabulary(docs, cfg.min_count, &stop, cfg.max_terms)
}

/// Vocabulary, optional tf-idf, and truncated SVD fitted on training
/// documents. Returns the binary matrix, the compressed features and the
/// view.
pub fn fit_tags(docs: &[Vec<String>], cfg: &TagConfig) -> Result<(TagMatrix, DMatrix<f64>, TagView)> {
    let vocab = build_vocab(docs, cfg)?;
    let (binary, report) = vectorize(docs, &vocab);
    if !report.empty_rows.is_empty() {
        log::info!("{} training documents have no in-vocabulary tags", report.empty_rows.len());
    }
    let (weighted, idf) = if cfg.tfidf {
        let (w, idf) = tfidf_weight(&binary)?;
        (w, Some(idf))
    } else {
        (binary.clone(), None)
    };
    let dim = cfg.dim.min(vocab.len()).min(docs.len());
    let svd = SvdOptions {
        oversampling: cfg.oversampling,
        power_iters: cfg.power_iters,
        tol: cfg.tol,
        seed: cfg.seed,
        ..SvdOptions::default()
    };
    let (features, compression) = compress_tags(&weighted, dim, &svd)?;
    Ok((
        binary,
        features,
        TagView {
            vocab,
            idf,
            compression,
        },
    ))
}

/// Where the unsupervised semantic view comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSource {
    Ncut,
    Kmeans,
    Nmf,
    Plsa,
    /// k-means on the visual features instead of the tags.
    VisualKmeans,
}

impl ClusterSource {
    pub fn name(self) -> &'static str {
        match self {
            ClusterSource::Ncut => "nc",
            ClusterSource::Kmeans => "kmeans",
            ClusterSource::Nmf => "nmf",
            ClusterSource::Plsa => "plsa",
            ClusterSource::VisualKmeans => "visual_kmeans",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nc" | "ncut" | "normalized_cut" => Some(ClusterSource::Ncut),
            "kmeans" | "k-means" => Some(ClusterSource::Kmeans),
            "nmf" => Some(ClusterSource::Nmf),
            "plsa" => Some(ClusterSource::Plsa),
            "visual_kmeans" | "visual-kmeans" => Some(ClusterSource::VisualKmeans),
            _ => None,
        }
    }
}

/// Training-set inputs the clustering methods draw on.
pub struct ClusterInputs<'a> {
    pub tags: &'a TagMatrix,
    pub tag_features: &'a DMatrix<f64>,
    pub visual_features: &'a DMatrix<f64>,
}

pub fn cluster_items(source: ClusterSource, c: usize, inputs: &ClusterInputs, seed: u64) -> Result<ClusterAssignment> {
    let km = KMeansOptions {
        seed,
        ..KMeansOptions::default()
    };
    match source {
        ClusterSource::Ncut => normalized_cut_cluster(
            &inputs.tags.matrix,
            c,
            &NcutOptions {
                kmeans: km,
                svd: SvdOptions {
                    seed,
                    ..NcutOptions::default().svd
                },
                ..NcutOptions::default()
            },
        ),
        ClusterSource::Kmeans => kmeans(inputs.tag_features, c, &km),
        ClusterSource::Nmf => nmf_cluster(
            &inputs.tags.matrix,
            c,
            &NmfOptions {
                seed,
                ..NmfOptions::default()
            },
        ),
        ClusterSource::Plsa => plsa_cluster(
            &inputs.tags.matrix,
            c,
            &PlsaOptions {
                seed,
                ..PlsaOptions::default()
            },
        ),
        ClusterSource::VisualKmeans => kmeans(inputs.visual_features, c, &km),
    }
}

pub fn cluster_labels(c: usize) -> Vec<String> {
    (0..c).map(|j| format!("c{j:02}")).collect()
}

pub fn indicator_view(indicator: IndicatorMatrix, labels: Vec<String>) -> View {
    View {
        spec: ViewSpec {
            role: ViewRole::Semantic,
            descriptor: ViewDescriptor::Indicator {
                labels,
                kind: indicator.kind,
            },
        },
        features: indicator.matrix,
    }
}

pub fn cluster_view(assignment: &ClusterAssignment) -> View {
    indicator_view(to_indicator(assignment), cluster_labels(assignment.n_clusters))
}

/// Sorted keyword vocabulary of the training items.
pub fn keyword_vocab(keywords: &[Vec<String>]) -> Vec<String> {
    keywords
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn keyword_view(keywords: &[Vec<String>]) -> Result<View> {
    let vocab = keyword_vocab(keywords);
    if vocab.is_empty() {
        return Err(Error::validation("no keywords on the training items"));
    }
    Ok(indicator_view(supervised_indicator(keywords, &vocab)?, vocab))
}

/// Which views a CCA model combines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Composition {
    #[serde(rename = "V+T")]
    VT,
    #[serde(rename = "V+K")]
    VK,
    #[serde(rename = "V+T+K")]
    VTK,
    #[serde(rename = "V+C")]
    VC,
    #[serde(rename = "V+T+C")]
    VTC,
}

impl Composition {
    pub fn name(self) -> &'static str {
        match self {
            Composition::VT => "V+T",
            Composition::VK => "V+K",
            Composition::VTK => "V+T+K",
            Composition::VC => "V+C",
            Composition::VTC => "V+T+C",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace(['+', '-', '_'], "").as_str() {
            "VT" => Some(Composition::VT),
            "VK" => Some(Composition::VK),
            "VTK" => Some(Composition::VTK),
            "VC" => Some(Composition::VC),
            "VTC" => Some(Composition::VTC),
            _ => None,
        }
    }

    pub fn has_text(self) -> bool {
        matches!(self, Composition::VT | Composition::VTK | Composition::VTC)
    }

    pub fn has_keywords(self) -> bool {
        matches!(self, Composition::VK | Composition::VTK)
    }

    pub fn has_clusters(self) -> bool {
        matches!(self, Composition::VC | Composition::VTC)
    }
}

/// Training features after preprocessing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub visual: DMatrix<f64>,
    pub assembly: FeatureAssembly,
    pub tags: TagMatrix,
    pub tag_features: DMatrix<f64>,
    pub tag_view: TagView,
}

pub fn prepare(
    visual_blocks: &[DMatrix<f64>],
    docs: &[Vec<String>],
    visual: &VisualConfig,
    tags: &TagConfig,
) -> Result<Prepared> {
    let (v, assembly) = fit_visual(visual_blocks, visual)?;
    let (t, tf, tag_view) = fit_tags(docs, tags)?;
    Ok(Prepared {
        visual: v,
        assembly,
        tags: t,
        tag_features: tf,
        tag_view,
    })
}

impl Prepared {
    pub fn visual_view(&self) -> View {
        View {
            spec: ViewSpec {
                role: ViewRole::Visual,
                descriptor: ViewDescriptor::Assembly(self.assembly.clone()),
            },
            features: self.visual.clone(),
        }
    }

    pub fn text_view(&self) -> View {
        View {
            spec: ViewSpec {
                role: ViewRole::Text,
                descriptor: self.tag_view.descriptor(),
            },
            features: self.tag_features.clone(),
        }
    }

    pub fn cluster_inputs(&self) -> ClusterInputs<'_> {
        ClusterInputs {
            tags: &self.tags,
            tag_features: &self.tag_features,
            visual_features: &self.visual,
        }
    }

    /// Views for `composition`; `semantic` is the K or C view when needed.
    pub fn view_set(&self, composition: Composition, semantic: Option<View>) -> Result<ViewSet> {
        let mut views = vec![self.visual_view()];
        if composition.has_text() {
            views.push(self.text_view());
        }
        if composition.has_keywords() || composition.has_clusters() {
            views.push(semantic.ok_or_else(|| {
                Error::validation(format!("{} needs a semantic view", composition.name()))
            })?);
        }
        ViewSet::new(views)
    }
}
