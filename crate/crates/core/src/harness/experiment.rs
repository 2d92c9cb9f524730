//! Train / validate / test protocol over a roster of models and tasks.
//!
//! Every model is fit on the training split. Its dimension (and, for
//! cluster-based third views, the cluster count) is chosen by validation
//! queries against the database split, and the report holds the test-query
//! precision of each supported (model, task) cell.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::pipeline::{
    cluster_items, cluster_view, keyword_view, prepare, ClusterSource, Composition, Prepared, TagConfig,
    VisualConfig,
};
use super::structural::structural_learning_embed;
use crate::cca::{
    fit_selection_model, select_from_model, CcaOptions, MultiViewModel, ValidationProtocol, ViewDescriptor,
    ViewRole, DEFAULT_DIMENSION_CANDIDATES,
};
use crate::retrieval::{
    annotate_latent, per_keyword_precision_at_p, precision_at_p, Hit, ItemMeta, LatentIndex, RankedResult,
    SimilarityMode,
};
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    I2I,
    T2I,
    K2I,
    I2T,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::I2I => "I2I",
            Task::T2I => "T2I",
            Task::K2I => "K2I",
            Task::I2T => "I2T",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s.to_ascii_uppercase().as_str() {
            "I2I" => Some(Task::I2I),
            "T2I" => Some(Task::T2I),
            "K2I" => Some(Task::K2I),
            "I2T" => Some(Task::I2T),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Visual features compared by Euclidean distance.
    VisualOnly,
    Cca {
        views: Composition,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clusters: Option<ClusterSource>,
    },
    Structural,
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::VisualOnly => "V only".into(),
            ModelSpec::Structural => "structural learning".into(),
            ModelSpec::Cca { views, clusters } => match clusters {
                Some(c) if views.has_clusters() => format!("CCA ({}) [{}]", views.name(), c.name()),
                _ => format!("CCA ({})", views.name()),
            },
        }
    }

    pub fn supports(&self, task: Task) -> bool {
        match self {
            ModelSpec::VisualOnly | ModelSpec::Structural => task == Task::I2I,
            ModelSpec::Cca { views, .. } => match task {
                Task::I2I => true,
                Task::T2I | Task::I2T => views.has_text(),
                Task::K2I => views.has_keywords(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub models: Vec<ModelSpec>,
    pub tasks: Vec<Task>,
    pub visual: VisualConfig,
    pub tags: TagConfig,
    pub epsilon: f64,
    pub dimension_candidates: Vec<usize>,
    /// Eigenvalue power in the similarity.
    pub p: f64,
    pub precision_at: usize,
    pub keyword_precision_at: usize,
    pub n_neighbors: usize,
    pub n_tags: usize,
    /// Candidate cluster counts for cluster-based views.
    pub cluster_counts: Vec<usize>,
    pub cluster_method: ClusterSource,
    /// Validation task; models that cannot run it fall back to I2I.
    pub selection_task: Task,
    /// Extra similarity modes evaluated on I2I and T2I for CCA models.
    pub ablation: Vec<SimilarityMode>,
    pub structural_rho: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cca = |views| ModelSpec::Cca { views, clusters: None };
        ExperimentConfig {
            models: vec![
                ModelSpec::VisualOnly,
                cca(Composition::VT),
                cca(Composition::VK),
                cca(Composition::VTK),
                cca(Composition::VC),
                cca(Composition::VTC),
                ModelSpec::Structural,
            ],
            tasks: vec![Task::I2I, Task::T2I, Task::K2I, Task::I2T],
            visual: VisualConfig::default(),
            tags: TagConfig::default(),
            epsilon: 1e-4,
            dimension_candidates: DEFAULT_DIMENSION_CANDIDATES.to_vec(),
            p: crate::retrieval::DEFAULT_POWER,
            precision_at: 50,
            keyword_precision_at: 20,
            n_neighbors: 50,
            n_tags: 5,
            cluster_counts: vec![10],
            cluster_method: ClusterSource::Ncut,
            selection_task: Task::T2I,
            ablation: Vec::new(),
            structural_rho: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSizes {
    pub train: usize,
    pub database: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterInfo {
    pub method: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterInfo>,
    /// `(d, validation precision)` for the chosen cluster count.
    pub validation: Vec<(usize, f64)>,
    pub cells: BTreeMap<Task, f64>,
    /// Test queries left out per task (no usable tags or keywords).
    pub skipped_queries: BTreeMap<Task, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub model: String,
    pub mode: String,
    pub task: Task,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub seed: u64,
    pub splits: SplitSizes,
    pub selection_task: Task,
    pub precision_at: usize,
    pub keyword_precision_at: usize,
    pub rows: Vec<ReportRow>,
    pub ablation: Vec<AblationRow>,
}

impl ExperimentReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn cell(&self, model: &str, task: Task) -> Option<f64> {
        self.row(model).and_then(|r| r.cells.get(&task).copied())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Wall-clock seconds per model, kept apart from the report so reruns
/// compare byte for byte.
pub type Timings = Vec<(String, f64)>;

/// Items of one split after preprocessing.
struct Split {
    ids: Vec<String>,
    labels: Vec<usize>,
    visual: DMatrix<f64>,
    tag_features: DMatrix<f64>,
    tags: Vec<Vec<String>>,
    keywords: Vec<Vec<String>>,
}

impl Split {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn items(&self, rows: &[usize]) -> Vec<ItemMeta> {
        rows.iter()
            .map(|&i| ItemMeta {
                id: self.ids[i].clone(),
                tags: self.tags[i].clone(),
                keywords: self.keywords[i].clone(),
            })
            .collect()
    }

    fn tagged_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tag_features.row(i).iter().any(|&v| v != 0.0)).collect()
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    db: Split,
    validation: Split,
    test: Split,
    /// Database ids per planted label.
    relevant: HashMap<usize, HashSet<String>>,
    db_keywords: HashMap<String, HashSet<String>>,
}

fn load_split(ds: &Dataset, rows: &[usize], prep: &Prepared) -> Result<Split> {
    let labels = ds.labels()?;
    let (_, tag_features) = prep.tag_view.features(&ds.tag_rows(rows))?;
    Ok(Split {
        ids: rows.iter().map(|&i| ds.ids[i].clone()).collect(),
        labels: rows.iter().map(|&i| labels[i]).collect(),
        visual: prep.assembly.transform(&ds.visual_rows(rows))?,
        tag_features,
        tags: ds.tag_rows(rows),
        keywords: match &ds.keywords {
            Some(k) => rows.iter().map(|&i| k[i].clone()).collect(),
            None => vec![Vec::new(); rows.len()],
        },
    })
}

/// Mean of per-query precisions; `None` when no query was usable.
fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

struct Outcome {
    precision: f64,
    skipped: usize,
}

impl Context<'_> {
    fn label_precision(&self, results: &[RankedResult], labels: impl Iterator<Item = usize>) -> Vec<f64> {
        let empty = HashSet::new();
        results
            .iter()
            .zip(labels)
            .map(|(r, l)| precision_at_p(r, self.relevant.get(&l).unwrap_or(&empty), self.cfg.precision_at).value)
            .collect()
    }

    /// Image-to-image over a fixed embedding (no CCA model).
    fn embedding_i2i(
        &self,
        db: DMatrix<f64>,
        queries: DMatrix<f64>,
        labels: &[usize],
        mode: SimilarityMode,
    ) -> Result<Outcome> {
        let scale = DVector::from_element(db.ncols(), 1.0);
        let rows: Vec<usize> = (0..self.db.len()).collect();
        let index = LatentIndex::with_scale(0, self.db.items(&rows), db, scale, 0.0)?;
        let usable: Vec<usize> = (0..queries.nrows())
            .filter(|&i| mode != SimilarityMode::ScaledCorrelation || queries.row(i).norm() > 0.0)
            .collect();
        let results = index.search_batch(&queries.select_rows(&usable), self.cfg.precision_at, mode)?;
        let scores = self.label_precision(&results, usable.iter().map(|&i| labels[i]));
        Ok(Outcome {
            precision: mean(&scores).ok_or_else(|| Error::validation("no usable I2I queries"))?,
            skipped: queries.nrows() - usable.len(),
        })
    }

    fn cca_task(&self, model: &MultiViewModel, task: Task, queries: &Split, mode: SimilarityMode) -> Result<Outcome> {
        let role_index = |role: ViewRole| {
            model
                .view_index(role)
                .ok_or_else(|| Error::validation(format!("model has no {} view for {}", role.name(), task.name())))
        };
        let vi = role_index(ViewRole::Visual)?;
        let all_db: Vec<usize> = (0..self.db.len()).collect();
        let image_index = || -> Result<LatentIndex> {
            let latent = model.project_features(vi, &self.db.visual)?;
            LatentIndex::from_latent(model, vi, self.db.items(&all_db), latent, self.cfg.p)
        };
        let search = |index: &LatentIndex, latent: DMatrix<f64>, k: usize| -> Result<(Vec<RankedResult>, Vec<usize>)> {
            let scale = index.scale();
            let usable: Vec<usize> = (0..latent.nrows())
                .filter(|&i| latent.row(i).transpose().component_mul(scale).norm() > 0.0)
                .collect();
            Ok((index.search_batch(&latent.select_rows(&usable), k, mode)?, usable))
        };
        let (scores, total) = match task {
            Task::I2I => {
                let index = image_index()?;
                let latent = model.project_features(vi, &queries.visual)?;
                let (results, usable) = search(&index, latent, self.cfg.precision_at)?;
                (self.label_precision(&results, usable.iter().map(|&i| queries.labels[i])), queries.len())
            }
            Task::T2I => {
                let ti = role_index(ViewRole::Text)?;
                let rows = queries.tagged_rows();
                let index = image_index()?;
                let latent = model.project_features(ti, &queries.tag_features.select_rows(&rows))?;
                let (results, usable) = search(&index, latent, self.cfg.precision_at)?;
                (self.label_precision(&results, usable.iter().map(|&u| queries.labels[rows[u]])), queries.len())
            }
            Task::K2I => {
                let ki = role_index(ViewRole::Semantic)?;
                let ViewDescriptor::Indicator { labels, .. } = &model.views[ki].descriptor else {
                    return Err(Error::validation("semantic view is not an indicator view"));
                };
                let position: HashMap<&str, usize> =
                    labels.iter().enumerate().map(|(j, l)| (l.as_str(), j)).collect();
                let mut query_sets = Vec::new();
                let mut rows = Vec::new();
                for (i, kws) in queries.keywords.iter().enumerate() {
                    let known: HashSet<String> =
                        kws.iter().filter(|k| position.contains_key(k.as_str())).cloned().collect();
                    if !known.is_empty() {
                        rows.push(i);
                        query_sets.push(known);
                    }
                }
                let mut features = DMatrix::zeros(rows.len(), labels.len());
                for (r, set) in query_sets.iter().enumerate() {
                    for k in set {
                        features[(r, position[k.as_str()])] = 1.0;
                    }
                }
                let index = image_index()?;
                let latent = model.project_features(ki, &features)?;
                let (results, usable) = search(&index, latent, self.cfg.keyword_precision_at)?;
                let scores = results
                    .iter()
                    .zip(&usable)
                    .map(|(r, &u)| {
                        per_keyword_precision_at_p(r, &query_sets[u], &self.db_keywords, self.cfg.keyword_precision_at)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (scores, queries.len())
            }
            Task::I2T => {
                let ti = role_index(ViewRole::Text)?;
                let tagged = self.db.tagged_rows();
                let tag_latent = model.project_features(ti, &self.db.tag_features.select_rows(&tagged))?;
                let index = LatentIndex::from_latent(model, ti, self.db.items(&tagged), tag_latent, self.cfg.p)?;
                let latent = model.project_features(vi, &queries.visual)?;
                let mut scores = Vec::new();
                for i in 0..queries.len() {
                    if queries.tags[i].is_empty() {
                        continue;
                    }
                    let q = latent.row(i).transpose();
                    if q.component_mul(index.scale()).norm() == 0.0 {
                        continue;
                    }
                    let tags = annotate_latent(&index, &q, self.cfg.n_neighbors, self.cfg.n_tags)?;
                    let result = RankedResult {
                        hits: tags.into_iter().map(|id| Hit { id, score: 1.0 }).collect(),
                    };
                    let truth: HashSet<String> = queries.tags[i].iter().cloned().collect();
                    scores.push(precision_at_p(&result, &truth, self.cfg.n_tags).value);
                }
                (scores, queries.len())
            }
        };
        Ok(Outcome {
            precision: mean(&scores).ok_or_else(|| Error::validation(format!("no usable {} queries", task.name())))?,
            skipped: total - scores.len(),
        })
    }
}

struct Selection<'a, 'b> {
    ctx: &'a Context<'b>,
    task: Task,
}

impl ValidationProtocol for Selection<'_, '_> {
    fn n_queries(&self) -> usize {
        self.ctx.validation.len()
    }

    fn score(&self, model: &MultiViewModel) -> Result<f64> {
        Ok(self
            .ctx
            .cca_task(model, self.task, &self.ctx.validation, SimilarityMode::ScaledCorrelation)?
            .precision)
    }
}

/// Model chosen by validation: its dimension and, for cluster views, the
/// cluster count.
#[derive(Debug, Clone)]
pub struct SelectedModel {
    pub model: MultiViewModel,
    pub d: usize,
    pub validation: Vec<(usize, f64)>,
    pub clusters: Option<ClusterInfo>,
    pub selection_task: Task,
}

struct Setup<'a> {
    ctx: Context<'a>,
    prep: Prepared,
    train_keywords: Option<Vec<Vec<String>>>,
    opts: CcaOptions,
}

fn setup<'a>(ds: &Dataset, cfg: &'a ExperimentConfig) -> Result<Setup<'a>> {
    let splits = ds.splits()?;
    splits.check_disjoint(ds.n_items())?;
    for (name, part) in splits.named() {
        if part.is_empty() {
            return Err(Error::validation(format!("{name} split is empty")));
        }
    }
    ds.labels()?;
    let prep = prepare(
        &ds.visual_rows(&splits.train),
        &ds.tag_rows(&splits.train),
        &cfg.visual,
        &cfg.tags,
    )?;
    let db = load_split(ds, &splits.database, &prep)?;
    let mut relevant: HashMap<usize, HashSet<String>> = HashMap::new();
    for (id, &l) in db.ids.iter().zip(&db.labels) {
        relevant.entry(l).or_default().insert(id.clone());
    }
    let db_keywords = db
        .ids
        .iter()
        .cloned()
        .zip(db.keywords.iter().map(|k| k.iter().cloned().collect()))
        .collect();
    let ctx = Context {
        cfg,
        validation: load_split(ds, &splits.validation, &prep)?,
        test: load_split(ds, &splits.test, &prep)?,
        db,
        relevant,
        db_keywords,
    };
    let train_keywords = ds
        .keywords
        .as_ref()
        .map(|k| splits.train.iter().map(|&i| k[i].clone()).collect());
    Ok(Setup {
        ctx,
        prep,
        train_keywords,
        opts: CcaOptions {
            epsilon: cfg.epsilon,
            ..CcaOptions::default()
        },
    })
}

impl Setup<'_> {
    fn fit_cca(&self, views: Composition, clusters: Option<ClusterSource>) -> Result<SelectedModel> {
        let cfg = self.ctx.cfg;
        let spec = ModelSpec::Cca { views, clusters };
        let selection_task = if spec.supports(cfg.selection_task) {
            cfg.selection_task
        } else {
            Task::I2I
        };
        let protocol = Selection {
            ctx: &self.ctx,
            task: selection_task,
        };
        let counts: Vec<Option<usize>> = if views.has_clusters() {
            cfg.cluster_counts.iter().map(|&c| Some(c)).collect()
        } else {
            vec![None]
        };
        if counts.is_empty() {
            return Err(Error::validation("no cluster counts configured"));
        }
        let source = clusters.unwrap_or(cfg.cluster_method);
        let mut best: Option<(f64, Option<usize>, crate::cca::DimensionChoice)> = None;
        for c in counts {
            let semantic = match c {
                Some(c) => {
                    let a = cluster_items(source, c, &self.prep.cluster_inputs(), cfg.seed)?;
                    Some(cluster_view(&a))
                }
                None if views.has_keywords() => {
                    let kw = self
                        .train_keywords
                        .as_ref()
                        .ok_or_else(|| Error::validation("keyword models need a keyword file"))?;
                    Some(keyword_view(kw)?)
                }
                None => None,
            };
            let vs = self.prep.view_set(views, semantic)?;
            let full = fit_selection_model(&vs, &cfg.dimension_candidates, &self.opts)?;
            let choice = select_from_model(&full, &cfg.dimension_candidates, &protocol)?;
            let score = choice
                .scores
                .iter()
                .find(|(d, _)| *d == choice.d)
                .map(|(_, s)| *s)
                .unwrap_or(f64::NEG_INFINITY);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, c, choice));
            }
        }
        let (_, c, choice) = best.expect("at least one candidate");
        Ok(SelectedModel {
            model: choice.model,
            d: choice.d,
            validation: choice.scores,
            clusters: c.map(|count| ClusterInfo {
                method: source.name().to_string(),
                count,
            }),
            selection_task,
        })
    }
}

/// Fits one CCA composition on the training split, choosing its dimension
/// (and cluster count) on the validation split as `run_experiment` does.
pub fn fit_selected(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    views: Composition,
    clusters: Option<ClusterSource>,
) -> Result<SelectedModel> {
    setup(ds, cfg)?.fit_cca(views, clusters)
}

/// Runs the protocol on `ds`, which must carry labels and splits.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<(ExperimentReport, Timings)> {
    if cfg.models.is_empty() || cfg.tasks.is_empty() {
        return Err(Error::validation("experiment needs at least one model and one task"));
    }
    let st = setup(ds, cfg)?;
    let (ctx, prep) = (&st.ctx, &st.prep);
    let splits = ds.splits()?;
    let mut rows = Vec::new();
    let mut ablation = Vec::new();
    let mut timings = Vec::new();
    for spec in &cfg.models {
        let start = Instant::now();
        let name = spec.name();
        log::info!("experiment: {name}");
        let mut row = ReportRow {
            model: name.clone(),
            d: None,
            clusters: None,
            validation: Vec::new(),
            cells: BTreeMap::new(),
            skipped_queries: BTreeMap::new(),
        };
        let tasks: Vec<Task> = cfg.tasks.iter().copied().filter(|&t| spec.supports(t)).collect();
        match spec {
            ModelSpec::VisualOnly => {
                if tasks.contains(&Task::I2I) {
                    let o = ctx.embedding_i2i(
                        ctx.db.visual.clone(),
                        ctx.test.visual.clone(),
                        &ctx.test.labels,
                        SimilarityMode::Euclidean,
                    )?;
                    row.cells.insert(Task::I2I, o.precision);
                    row.skipped_queries.insert(Task::I2I, o.skipped);
                }
            }
            ModelSpec::Structural => {
                let bound = prep.visual.ncols().min(prep.tags.matrix.ncols());
                let max_d = cfg.dimension_candidates.iter().map(|&c| c.min(bound)).max().unwrap_or(bound);
                let full = structural_learning_embed(&prep.visual, &prep.tags.matrix, cfg.structural_rho, max_d)?;
                let mut ds_: Vec<usize> = cfg.dimension_candidates.iter().map(|&c| c.min(max_d)).collect();
                ds_.sort_unstable();
                ds_.dedup();
                let mut best: Option<(usize, f64)> = None;
                for &d in &ds_ {
                    let e = full.embedding.columns(0, d);
                    let o = ctx.embedding_i2i(
                        &ctx.db.visual * e,
                        &ctx.validation.visual * e,
                        &ctx.validation.labels,
                        SimilarityMode::ScaledCorrelation,
                    )?;
                    row.validation.push((d, o.precision));
                    if best.is_none_or(|(_, s)| o.precision > s) {
                        best = Some((d, o.precision));
                    }
                }
                let (d, _) = best.ok_or_else(|| Error::validation("no candidate dimensions"))?;
                row.d = Some(d);
                if tasks.contains(&Task::I2I) {
                    let e = full.embedding.columns(0, d);
                    let o = ctx.embedding_i2i(
                        &ctx.db.visual * e,
                        &ctx.test.visual * e,
                        &ctx.test.labels,
                        SimilarityMode::ScaledCorrelation,
                    )?;
                    row.cells.insert(Task::I2I, o.precision);
                    row.skipped_queries.insert(Task::I2I, o.skipped);
                }
            }
            ModelSpec::Cca { views, clusters } => {
                let choice = st.fit_cca(*views, *clusters)?;
                row.d = Some(choice.d);
                row.validation = choice.validation.clone();
                row.clusters = choice.clusters.clone();
                for &task in &tasks {
                    let o = ctx.cca_task(&choice.model, task, &ctx.test, SimilarityMode::ScaledCorrelation)?;
                    row.cells.insert(task, o.precision);
                    row.skipped_queries.insert(task, o.skipped);
                }
                for &mode in &cfg.ablation {
                    for task in [Task::I2I, Task::T2I] {
                        if tasks.contains(&task) {
                            let o = ctx.cca_task(&choice.model, task, &ctx.test, mode)?;
                            ablation.push(AblationRow {
                                model: name.clone(),
                                mode: mode.name().to_string(),
                                task,
                                precision: o.precision,
                            });
                        }
                    }
                }
            }
        }
        timings.push((name, start.elapsed().as_secs_f64()));
        rows.push(row);
    }
    Ok((
        ExperimentReport {
            format_version: REPORT_VERSION,
            seed: cfg.seed,
            splits: SplitSizes {
                train: splits.train.len(),
                database: splits.database.len(),
                validation: splits.validation.len(),
                test: splits.test.len(),
            },
            selection_task: cfg.selection_task,
            precision_at: cfg.precision_at,
            keyword_precision_at: cfg.keyword_precision_at,
            rows,
            ablation,
        },
        timings,
    ))
}
