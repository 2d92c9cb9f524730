//! Model and index directories: `manifest.json` plus `MVX1` matrix files.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::formats::{read_dense, write_dense};
use crate::cca::{MultiViewModel, ViewDescriptor, ViewRole, ViewSpec};
use crate::kernel_maps::{rff_fit, AssembledBlock, FeatureAssembly, FittedMap};
use crate::linalg::PcaModel;
use crate::retrieval::{ItemMeta, LatentIndex};
use crate::semantics::IndicatorKind;
use crate::text_view::{TagCompression, TagVocabulary};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Settings stored with a model that the math itself does not need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub p: f64,
    pub seeds: BTreeMap<String, u64>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        ModelMeta {
            p: crate::retrieval::DEFAULT_POWER,
            seeds: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    d: usize,
    epsilon: f64,
    eigenvalues: Vec<f64>,
    p: f64,
    seeds: BTreeMap<String, u64>,
    views: Vec<ViewEntry>,
}

#[derive(Serialize, Deserialize)]
struct ViewEntry {
    role: ViewRole,
    projection: String,
    mean: String,
    descriptor: DescriptorEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DescriptorEntry {
    Assembly {
        blocks: Vec<BlockEntry>,
        global_means: Vec<f64>,
    },
    Tags {
        terms: Vec<String>,
        doc_freq: Vec<usize>,
        idf: Option<Vec<f64>>,
        basis: String,
        singular_values: Vec<f64>,
    },
    Indicator {
        labels: Vec<String>,
        kind: IndicatorKind,
    },
    Passthrough {
        dim: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    map: MapEntry,
    input_dim: usize,
    pca_mean: Vec<f64>,
    pca_components: String,
    pca_variances: Vec<f64>,
}

/// Random Fourier features are stored by their generating parameters.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MapEntry {
    Rff { output_dim: usize, sigma: f64, seed: u64 },
    Sqrt,
    Identity,
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn save_model(dir: impl AsRef<Path>, model: &MultiViewModel, meta: &ModelMeta) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut views = Vec::new();
    for (i, spec) in model.views.iter().enumerate() {
        let projection = format!("view{i}_projection.mvx");
        write_dense(dir.join(&projection), &model.projections[i])?;
        let mean = format!("view{i}_mean.mvx");
        write_dense(dir.join(&mean), &nalgebra::DMatrix::from_column_slice(1, model.means[i].len(), model.means[i].as_slice()))?;
        let descriptor = match &spec.descriptor {
            ViewDescriptor::Assembly(a) => {
                let mut blocks = Vec::new();
                for (b, block) in a.blocks.iter().enumerate() {
                    let pca_components = format!("view{i}_block{b}_pca.mvx");
                    write_dense(dir.join(&pca_components), &block.pca.components)?;
                    let map = match &block.map {
                        FittedMap::Rff(r) => MapEntry::Rff {
                            output_dim: r.output_dim,
                            sigma: r.sigma,
                            seed: r.seed,
                        },
                        FittedMap::Sqrt => MapEntry::Sqrt,
                        FittedMap::Identity => MapEntry::Identity,
                    };
                    blocks.push(BlockEntry {
                        map,
                        input_dim: block.input_dim,
                        pca_mean: vec_of(&block.pca.mean),
                        pca_components,
                        pca_variances: vec_of(&block.pca.variances),
                    });
                }
                DescriptorEntry::Assembly {
                    blocks,
                    global_means: vec_of(&a.global_means),
                }
            }
            ViewDescriptor::Tags { vocab, idf, compression } => {
                let basis = format!("view{i}_tag_basis.mvx");
                write_dense(dir.join(&basis), &compression.basis)?;
                DescriptorEntry::Tags {
                    terms: vocab.terms().to_vec(),
                    doc_freq: vocab.doc_freq().to_vec(),
                    idf: idf.clone(),
                    basis,
                    singular_values: vec_of(&compression.singular_values),
                }
            }
            ViewDescriptor::Indicator { labels, kind } => DescriptorEntry::Indicator {
                labels: labels.clone(),
                kind: *kind,
            },
            ViewDescriptor::Passthrough { dim } => DescriptorEntry::Passthrough { dim: *dim },
        };
        views.push(ViewEntry {
            role: spec.role,
            projection,
            mean,
            descriptor,
        });
    }
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        d: model.dim(),
        epsilon: model.epsilon,
        eigenvalues: vec_of(&model.eigenvalues),
        p: meta.p,
        seeds: meta.seeds.clone(),
        views,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(MultiViewModel, ModelMeta)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: ModelManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    let mut views = Vec::new();
    let mut projections = Vec::new();
    let mut means = Vec::new();
    for entry in manifest.views {
        let w = read_dense(dir.join(&entry.projection))?;
        if w.ncols() != manifest.d {
            return Err(Error::format(&manifest_path, format!("{} has {} columns, d is {}", entry.projection, w.ncols(), manifest.d)));
        }
        let mean = read_dense(dir.join(&entry.mean))?;
        let descriptor = match entry.descriptor {
            DescriptorEntry::Assembly { blocks, global_means } => {
                let mut fitted = Vec::new();
                for b in blocks {
                    let map = match b.map {
                        MapEntry::Rff { output_dim, sigma, seed } => {
                            FittedMap::Rff(rff_fit(b.input_dim, output_dim, sigma, seed)?)
                        }
                        MapEntry::Sqrt => FittedMap::Sqrt,
                        MapEntry::Identity => FittedMap::Identity,
                    };
                    fitted.push(AssembledBlock {
                        map,
                        input_dim: b.input_dim,
                        pca: PcaModel {
                            mean: DVector::from_vec(b.pca_mean),
                            components: read_dense(dir.join(&b.pca_components))?,
                            variances: DVector::from_vec(b.pca_variances),
                        },
                    });
                }
                ViewDescriptor::Assembly(FeatureAssembly {
                    blocks: fitted,
                    global_means: DVector::from_vec(global_means),
                })
            }
            DescriptorEntry::Tags {
                terms,
                doc_freq,
                idf,
                basis,
                singular_values,
            } => ViewDescriptor::Tags {
                vocab: TagVocabulary::from_terms(terms, doc_freq)?,
                idf,
                compression: TagCompression {
                    basis: read_dense(dir.join(&basis))?,
                    singular_values: DVector::from_vec(singular_values),
                },
            },
            DescriptorEntry::Indicator { labels, kind } => ViewDescriptor::Indicator { labels, kind },
            DescriptorEntry::Passthrough { dim } => ViewDescriptor::Passthrough { dim },
        };
        if descriptor.dim() != w.nrows() || mean.len() != w.nrows() {
            return Err(Error::format(
                &manifest_path,
                format!("view {} dimensions do not match its projection", entry.role.name()),
            ));
        }
        views.push(ViewSpec {
            role: entry.role,
            descriptor,
        });
        projections.push(w);
        means.push(DVector::from_column_slice(mean.as_slice()));
    }
    if manifest.eigenvalues.len() != manifest.d {
        return Err(Error::format(&manifest_path, "eigenvalue count differs from d"));
    }
    Ok((
        MultiViewModel {
            views,
            projections,
            means,
            eigenvalues: DVector::from_vec(manifest.eigenvalues),
            epsilon: manifest.epsilon,
        },
        ModelMeta {
            p: manifest.p,
            seeds: manifest.seeds,
        },
    ))
}

#[derive(Serialize, Deserialize)]
struct IndexManifest {
    format_version: u32,
    view: usize,
    p: f64,
    latent: String,
    items: String,
}

/// Writes the unscaled latent rows and item metadata; scaling is redone on
/// load from the model.
pub fn save_index(dir: impl AsRef<Path>, index: &LatentIndex) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_dense(dir.join("latent.mvx"), index.raw())?;
    let mut text = String::new();
    for m in index.items() {
        text.push_str(&format!("{}\t{}\t{}\n", m.id, m.tags.join(","), m.keywords.join(",")));
    }
    std::fs::write(dir.join("items.tsv"), text)?;
    let manifest = IndexManifest {
        format_version: FORMAT_VERSION,
        view: index.view,
        p: index.p,
        latent: "latent.mvx".into(),
        items: "items.tsv".into(),
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_index(dir: impl AsRef<Path>, model: &MultiViewModel) -> Result<LatentIndex> {
    let dir = dir.as_ref();
    let manifest: IndexManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    let latent = read_dense(dir.join(&manifest.latent))?;
    let items_path = dir.join(&manifest.items);
    let mut items = Vec::new();
    for line in std::fs::read_to_string(&items_path)?.lines().filter(|l| !l.is_empty()) {
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or_default().to_string();
        let list = |s: Option<&str>| -> Vec<String> {
            s.unwrap_or_default()
                .split(',')
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect()
        };
        let tags = list(parts.next());
        let keywords = list(parts.next());
        items.push(ItemMeta { id, tags, keywords });
    }
    LatentIndex::from_latent(model, manifest.view, items, latent, manifest.p)
}
