use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use mvcca::cca::{fit_cca, CcaOptions, MultiViewModel, ViewDescriptor, ViewInput, ViewRole};
use mvcca::harness::experiment::{fit_selected, run_experiment, ExperimentConfig, Task};
use mvcca::harness::export::{export_latent_2d, to_tsv};
use mvcca::harness::formats::{read_assignments, write_assignments, write_dense, write_ids, write_sparse, write_vocabulary};
use mvcca::harness::pipeline::{
    cluster_items, cluster_labels, cluster_view, keyword_view, prepare, ClusterSource, Composition,
    TagConfig, VisualConfig,
};
use mvcca::harness::{generate_three_view, load_index, load_model, save_index, save_model, Dataset, ModelMeta, SynthConfig};
use mvcca::retrieval::{
    build_index, per_keyword_precision_at_p, precision_at_p, query, Hit, ItemMeta, RankedResult,
    SimilarityMode,
};
use mvcca::semantics::IndicatorKind;
use mvcca::{harness::pipeline, retrieval};
use mvcca::{Error, Result};

use crate::config::Section;
use crate::{
    AnnotateArgs, ClusterArgs, EvalArgs, ExperimentArgs, ExportArgs, FeaturizeArgs, FitArgs, IndexArgs, ProjectArgs,
    SearchArgs, SynthArgs, VocabArgs,
};

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

/// Rows of `split`, or of `fallback` when no split is named; every row when
/// the dataset has no splits and none was asked for. `all` names every row.
fn split_rows(ds: &Dataset, split: Option<&str>, fallback: &str) -> Result<Vec<usize>> {
    match split {
        Some("all") => Ok((0..ds.n_items()).collect()),
        Some(name) => Ok(ds.splits()?.by_name(name)?.to_vec()),
        None => match &ds.splits {
            Some(s) => Ok(s.by_name(fallback)?.to_vec()),
            None => Ok((0..ds.n_items()).collect()),
        },
    }
}

fn parse_role(s: &str) -> Result<ViewRole> {
    match s {
        "visual" | "image" | "V" => Ok(ViewRole::Visual),
        "text" | "tags" | "T" => Ok(ViewRole::Text),
        "semantic" | "keywords" | "clusters" | "K" | "C" => Ok(ViewRole::Semantic),
        _ => Err(invalid(format!("unknown view {s:?}; expected visual, text or semantic"))),
    }
}

fn parse_mode(s: &str) -> Result<SimilarityMode> {
    [SimilarityMode::ScaledCorrelation, SimilarityMode::ScaledEuclidean, SimilarityMode::Euclidean]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| invalid(format!("unknown similarity mode {s:?}; expected scale+corr, scale+eucl or eucl")))
}

fn view_of(model: &MultiViewModel, role: ViewRole) -> Result<usize> {
    model
        .view_index(role)
        .ok_or_else(|| invalid(format!("model has no {} view", role.name())))
}

fn comma_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

fn load_assignments(path: Option<&Path>) -> Result<Option<HashMap<String, usize>>> {
    path.map(|p| Ok(read_assignments(p)?.into_iter().collect())).transpose()
}

/// Raw input of dataset row `i` for view `view` of `model`.
fn item_input(
    ds: &Dataset,
    i: usize,
    model: &MultiViewModel,
    view: usize,
    assignments: Option<&HashMap<String, usize>>,
) -> Result<ViewInput> {
    Ok(match model.views[view].role {
        ViewRole::Visual => ViewInput::Blocks(ds.visual.iter().map(|b| b.row(i).iter().copied().collect()).collect()),
        ViewRole::Text => ViewInput::tags(&ds.tags[i]),
        ViewRole::Semantic => match &model.views[view].descriptor {
            ViewDescriptor::Indicator {
                kind: IndicatorKind::MultiHot,
                ..
            } => ViewInput::Labels(ds.keywords()?[i].clone()),
            ViewDescriptor::Indicator {
                kind: IndicatorKind::SingleLabel,
                labels,
            } => {
                let map = assignments.ok_or_else(|| invalid("cluster views need --assignments"))?;
                let id = &ds.ids[i];
                let c = *map.get(id).ok_or_else(|| invalid(format!("no cluster assigned to {id}")))?;
                let names = cluster_labels(labels.len());
                ViewInput::Labels(vec![names
                    .get(c)
                    .ok_or_else(|| invalid(format!("cluster {c} of {id} is out of range")))?
                    .clone()])
            }
            _ => return Err(invalid("semantic view cannot be built from dataset fields")),
        },
    })
}

fn item_meta(ds: &Dataset, i: usize) -> ItemMeta {
    ItemMeta {
        id: ds.ids[i].clone(),
        tags: ds.tags[i].clone(),
        keywords: ds.keywords.as_ref().map(|k| k[i].clone()).unwrap_or_default(),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut s = Section::load(a.config.as_deref(), "synth")?;
    s.set("n", a.n)?
        .set("topics", a.topics)?
        .set("visual_dim", a.visual_dim)?
        .set("tags_per_item", a.tags_per_item)?
        .set("tag_noise", a.tag_noise)?
        .set("keyword_noise", a.keyword_noise)?
        .set("visual_noise", a.visual_noise)?
        .set("seed", a.seed)?;
    let cfg: SynthConfig = s.parse("synth")?;
    let ds = generate_three_view(&cfg)?;
    let manifest = ds.save(&a.out)?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn build_vocab(a: VocabArgs) -> Result<()> {
    let mut s = Section::load(a.config.as_deref(), "tags")?;
    s.set("min_count", a.min_count)?.set("max_terms", a.max_terms)?;
    let cfg: TagConfig = s.parse("tags")?;
    let ds = Dataset::load(&a.dataset)?;
    let rows = split_rows(&ds, a.split.as_deref(), "train")?;
    let vocab = pipeline::build_vocab(&ds.tag_rows(&rows), &cfg)?;
    write_vocabulary(&a.out, &vocab)?;
    log::info!("{} terms from {} documents", vocab.len(), rows.len());
    Ok(())
}

pub fn featurize(a: FeaturizeArgs) -> Result<()> {
    let mut vs = Section::load(a.config.as_deref(), "visual")?;
    vs.set("pca_dim", a.pca_dim)?.set("rff_dim", a.rff_dim)?;
    let visual: VisualConfig = vs.parse("visual")?;
    let mut ts = Section::load(a.config.as_deref(), "tags")?;
    ts.set("dim", a.tag_dim)?.set("tfidf", a.tfidf.then_some(true))?;
    let tags: TagConfig = ts.parse("tags")?;
    let ds = Dataset::load(&a.dataset)?;
    let rows = split_rows(&ds, a.split.as_deref(), "train")?;
    let prep = prepare(&ds.visual_rows(&rows), &ds.tag_rows(&rows), &visual, &tags)?;
    std::fs::create_dir_all(&a.out)?;
    let v = prep.assembly.transform(&ds.visual)?;
    let (binary, t) = prep.tag_view.features(&ds.tags)?;
    write_dense(a.out.join("visual.mvx"), &v)?;
    write_dense(a.out.join("tags.mvx"), &t)?;
    write_sparse(a.out.join("tags_binary.txt"), &binary.matrix)?;
    write_vocabulary(a.out.join("vocab.tsv"), &prep.tag_view.vocab)?;
    write_ids(a.out.join("ids.txt"), &ds.ids)?;
    log::info!("visual {}x{}, tags {}x{}", v.nrows(), v.ncols(), t.nrows(), t.ncols());
    Ok(())
}

pub fn cluster_tags(a: ClusterArgs) -> Result<()> {
    let source =
        ClusterSource::parse(&a.method).ok_or_else(|| invalid(format!("unknown cluster method {:?}", a.method)))?;
    let mut ts = Section::load(a.config.as_deref(), "tags")?;
    ts.set("dim", a.tag_dim)?;
    let tags: TagConfig = ts.parse("tags")?;
    let visual: VisualConfig = Section::load(a.config.as_deref(), "visual")?.parse("visual")?;
    let ds = Dataset::load(&a.dataset)?;
    let rows = split_rows(&ds, a.split.as_deref(), "train")?;
    let prep = prepare(&ds.visual_rows(&rows), &ds.tag_rows(&rows), &visual, &tags)?;
    let assignment = cluster_items(source, a.clusters, &prep.cluster_inputs(), a.seed.unwrap_or(0))?;
    if !assignment.flagged_items.is_empty() {
        log::warn!("{} items were assigned by the fallback rule", assignment.flagged_items.len());
    }
    let ids: Vec<String> = rows.iter().map(|&i| ds.ids[i].clone()).collect();
    write_assignments(&a.out, &ids, &assignment.labels)
}

fn experiment_config(path: Option<&Path>, f: impl FnOnce(&mut Section) -> Result<()>) -> Result<ExperimentConfig> {
    let mut s = Section::load(path, "experiment")?;
    f(&mut s)?;
    s.parse("experiment")
}

pub fn fit(a: FitArgs) -> Result<()> {
    let views = Composition::parse(&a.views).ok_or_else(|| invalid(format!("unknown view composition {:?}", a.views)))?;
    let clusters = a
        .clusters
        .as_deref()
        .map(|c| ClusterSource::parse(c).ok_or_else(|| invalid(format!("unknown cluster method {c:?}"))))
        .transpose()?;
    let cfg = experiment_config(a.config.as_deref(), |s| {
        s.set("cluster_counts", a.cluster_count.clone())?
            .set("epsilon", a.epsilon)?
            .set("p", a.p)?
            .set("seed", a.seed)?;
        Ok(())
    })?;
    let ds = Dataset::load(&a.dataset)?;
    let model = match a.d {
        Some(d) => {
            let rows = split_rows(&ds, None, "train")?;
            let prep = prepare(&ds.visual_rows(&rows), &ds.tag_rows(&rows), &cfg.visual, &cfg.tags)?;
            let semantic = if views.has_clusters() {
                let c = *cfg.cluster_counts.first().ok_or_else(|| invalid("no cluster count given"))?;
                let source = clusters.unwrap_or(cfg.cluster_method);
                Some(cluster_view(&cluster_items(source, c, &prep.cluster_inputs(), cfg.seed)?))
            } else if views.has_keywords() {
                let kw = ds.keywords()?;
                Some(keyword_view(&rows.iter().map(|&i| kw[i].clone()).collect::<Vec<_>>())?)
            } else {
                None
            };
            let opts = CcaOptions {
                epsilon: cfg.epsilon,
                ..CcaOptions::default()
            };
            fit_cca(&prep.view_set(views, semantic)?, d, &opts)?
        }
        None => {
            let selected = fit_selected(&ds, &cfg, views, clusters)?;
            log::info!("selected d = {} by {} on validation", selected.d, selected.selection_task.name());
            if let Some(c) = &selected.clusters {
                log::info!("selected {} clusters from {}", c.count, c.method);
            }
            selected.model
        }
    };
    let meta = ModelMeta {
        p: cfg.p,
        seeds: [
            ("experiment".to_string(), cfg.seed),
            ("visual".to_string(), cfg.visual.seed),
            ("tags".to_string(), cfg.tags.seed),
        ]
        .into_iter()
        .collect(),
    };
    save_model(&a.out, &model, &meta)?;
    println!("d = {}", model.dim());
    Ok(())
}

pub fn project(a: ProjectArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let ds = Dataset::load(&a.dataset)?;
    let view = view_of(&model, parse_role(&a.view)?)?;
    let assignments = load_assignments(a.assignments.as_deref())?;
    let rows = split_rows(&ds, Some(a.split.as_deref().unwrap_or("all")), "all")?;
    let mut latent = mvcca::DenseMatrix::zeros(rows.len(), model.dim());
    for (r, &i) in rows.iter().enumerate() {
        let p = model.project(view, &item_input(&ds, i, &model, view, assignments.as_ref())?)?;
        latent.row_mut(r).copy_from(&p.latent.transpose());
    }
    write_dense(&a.out, &latent)?;
    let ids: Vec<String> = rows.iter().map(|&i| ds.ids[i].clone()).collect();
    write_ids(with_extension(&a.out, ".ids"), &ids)
}

pub fn index(a: IndexArgs) -> Result<()> {
    let (model, meta) = load_model(&a.model)?;
    let cfg = experiment_config(a.config.as_deref(), |s| {
        s.set("p", a.p.or(Some(meta.p)))?;
        Ok(())
    })?;
    let ds = Dataset::load(&a.dataset)?;
    let view = view_of(&model, parse_role(&a.view)?)?;
    let assignments = load_assignments(a.assignments.as_deref())?;
    let rows = split_rows(&ds, Some(&a.split), "database")?;
    let items = rows
        .iter()
        .map(|&i| Ok((item_meta(&ds, i), item_input(&ds, i, &model, view, assignments.as_ref())?)))
        .collect::<Result<Vec<_>>>()?;
    let index = build_index(&model, view, items, cfg.p)?;
    let excluded = (0..index.len()).filter(|&i| index.is_excluded(i)).count();
    if excluded > 0 {
        log::warn!("{excluded} items project to zero and cannot be retrieved");
    }
    save_index(&a.out, &index)
}

pub fn search(a: SearchArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let index = load_index(&a.index, &model)?;
    let mode = parse_mode(&a.mode)?;
    let (view, input) = if let Some(tags) = &a.tags {
        (view_of(&model, ViewRole::Text)?, ViewInput::tags(&comma_list(tags)))
    } else if let Some(kws) = &a.keywords {
        (view_of(&model, ViewRole::Semantic)?, ViewInput::Labels(comma_list(kws)))
    } else if let (Some(item), Some(path)) = (&a.item, &a.dataset) {
        let ds = Dataset::load(path)?;
        let view = view_of(&model, ViewRole::Visual)?;
        let input = item_input(&ds, ds.row_of(item)?, &model, view, None)?;
        (view, input)
    } else {
        return Err(invalid("give one of --tags, --keywords or --item"));
    };
    let weights: HashMap<String, f64> = a.weights.into_iter().collect();
    let weights = (!weights.is_empty()).then_some(&weights);
    let (result, report) = query(&index, &model, view, &input, a.k, weights)?;
    if !report.dropped_tags.is_empty() {
        log::warn!("unknown query tags dropped: {}", report.dropped_tags.join(" "));
    }
    let result = if mode == SimilarityMode::ScaledCorrelation {
        result
    } else {
        let input = match weights {
            Some(w) => mvcca::retrieval::apply_tag_weights(&input, w)?,
            None => input,
        };
        index.search_latent(&model.project(view, &input)?.latent, a.k, mode)?
    };
    write_out(None, &result.to_tsv())
}

pub fn annotate(a: AnnotateArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let index = load_index(&a.index, &model)?;
    let ds = Dataset::load(&a.dataset)?;
    let view = view_of(&model, ViewRole::Visual)?;
    let rows = if a.item.is_empty() {
        split_rows(&ds, Some(&a.split), "test")?
    } else {
        a.item.iter().map(|id| ds.row_of(id)).collect::<Result<Vec<_>>>()?
    };
    let mut out = String::new();
    for i in rows {
        let input = item_input(&ds, i, &model, view, None)?;
        let tags = retrieval::annotate(&index, &model, view, &input, a.neighbors, a.tags)?;
        out.push_str(&format!("{}\t{}\n", ds.ids[i], tags.join(",")));
    }
    write_out(None, &out)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let task = Task::parse(&a.task).ok_or_else(|| invalid(format!("unknown task {:?}", a.task)))?;
    let cfg = experiment_config(a.config.as_deref(), |_| Ok(()))?;
    let (model, _) = load_model(&a.model)?;
    let index = load_index(&a.index, &model)?;
    let ds = Dataset::load(&a.dataset)?;
    let rows = split_rows(&ds, Some(&a.split), "test")?;
    let p = a.p.unwrap_or(if task == Task::K2I {
        cfg.keyword_precision_at
    } else {
        cfg.precision_at
    });
    let neighbors = a.neighbors.unwrap_or(cfg.n_neighbors);
    let n_tags = a.tags.unwrap_or(cfg.n_tags);
    let row_of: HashMap<&str, usize> = ds.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let mut relevant_by_label: HashMap<usize, HashSet<String>> = HashMap::new();
    if matches!(task, Task::I2I | Task::T2I) {
        let labels = ds.labels()?;
        for m in index.items() {
            let i = *row_of
                .get(m.id.as_str())
                .ok_or_else(|| invalid(format!("indexed item {} is not in the dataset", m.id)))?;
            relevant_by_label.entry(labels[i]).or_default().insert(m.id.clone());
        }
    }
    let item_keywords: HashMap<String, HashSet<String>> = index
        .items()
        .iter()
        .map(|m| (m.id.clone(), m.keywords.iter().cloned().collect()))
        .collect();

    let mut scores = Vec::new();
    let mut skipped = 0;
    let empty = HashSet::new();
    for &i in &rows {
        let outcome = match task {
            Task::I2I | Task::T2I => {
                let (view, input) = if task == Task::I2I {
                    let v = view_of(&model, ViewRole::Visual)?;
                    (v, item_input(&ds, i, &model, v, None)?)
                } else {
                    (view_of(&model, ViewRole::Text)?, ViewInput::tags(&ds.tags[i]))
                };
                query(&index, &model, view, &input, p, None).map(|(r, _)| {
                    let rel = relevant_by_label.get(&ds.labels().expect("labels")[i]).unwrap_or(&empty);
                    precision_at_p(&r, rel, p).value
                })
            }
            Task::K2I => {
                let view = view_of(&model, ViewRole::Semantic)?;
                let ViewDescriptor::Indicator { labels, .. } = &model.views[view].descriptor else {
                    return Err(invalid("semantic view is not an indicator view"));
                };
                let known: HashSet<String> =
                    ds.keywords()?[i].iter().filter(|k| labels.contains(k)).cloned().collect();
                if known.is_empty() {
                    skipped += 1;
                    continue;
                }
                let input = ViewInput::Labels(known.iter().cloned().collect());
                query(&index, &model, view, &input, p, None)
                    .and_then(|(r, _)| per_keyword_precision_at_p(&r, &known, &item_keywords, p))
            }
            Task::I2T => {
                if ds.tags[i].is_empty() {
                    skipped += 1;
                    continue;
                }
                let view = view_of(&model, ViewRole::Visual)?;
                let input = item_input(&ds, i, &model, view, None)?;
                retrieval::annotate(&index, &model, view, &input, neighbors, n_tags).map(|tags| {
                    let result = RankedResult {
                        hits: tags.into_iter().map(|id| Hit { id, score: 1.0 }).collect(),
                    };
                    let truth: HashSet<String> = ds.tags[i].iter().cloned().collect();
                    precision_at_p(&result, &truth, n_tags).value
                })
            }
        };
        match outcome {
            Ok(s) => scores.push(s),
            Err(Error::UndefinedSimilarity(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let precision = mean(&scores).ok_or_else(|| invalid(format!("no usable {} queries", task.name())))?;
    let report = serde_json::json!({
        "task": task,
        "p": if task == Task::I2T { n_tags } else { p },
        "precision": precision,
        "queries": scores.len(),
        "skipped": skipped,
    });
    write_out(None, &(serde_json::to_string_pretty(&report)? + "\n"))
}

pub fn experiment(a: ExperimentArgs) -> Result<()> {
    let tasks = a
        .tasks
        .as_ref()
        .map(|ts| {
            ts.iter()
                .map(|t| Task::parse(t).ok_or_else(|| invalid(format!("unknown task {t:?}"))))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let cfg = experiment_config(a.config.as_deref(), |s| {
        s.set("seed", a.seed)?.set("precision_at", a.precision_at)?.set("tasks", tasks)?;
        Ok(())
    })?;
    let ds = match &a.dataset {
        Some(p) => Dataset::load(p)?,
        None => {
            let mut s = Section::load(a.config.as_deref(), "synth")?;
            s.set("n", a.n)?.set("seed", a.synth_seed)?;
            generate_three_view(&s.parse::<SynthConfig>("synth")?)?
        }
    };
    let (report, timings) = run_experiment(&ds, &cfg)?;
    for (model, secs) in &timings {
        log::info!("{model}: {secs:.2}s");
    }
    eprintln!("total {:.1}s", timings.iter().map(|(_, s)| s).sum::<f64>());
    write_out(a.out.as_deref(), &report.to_json()?)
}

pub fn export_2d(a: ExportArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let ds = Dataset::load(&a.dataset)?;
    let assignments = load_assignments(a.assignments.as_deref())?;
    let rows = split_rows(&ds, Some(&a.split), "test")?;
    let views = a
        .views
        .iter()
        .map(|v| view_of(&model, parse_role(v)?))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = match (&ds.labels, &ds.keywords) {
        (Some(l), _) => l.iter().map(|z| z.to_string()).collect(),
        (None, Some(k)) => k.iter().map(|k| k.first().cloned().unwrap_or_default()).collect(),
        (None, None) => vec![String::new(); ds.n_items()],
    };
    let mut entries = Vec::new();
    for &i in &rows {
        for &v in &views {
            entries.push((i, v, item_input(&ds, i, &model, v, assignments.as_ref())?));
        }
    }
    let points = export_latent_2d(
        &model,
        entries
            .iter()
            .map(|(i, v, input)| (ds.ids[*i].as_str(), *v, input, labels[*i].as_str())),
    )?;
    std::fs::write(&a.out, to_tsv(&points))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_and_mode_names() {
        assert_eq!(parse_role("text").unwrap(), ViewRole::Text);
        assert!(parse_role("audio").is_err_and(|e| e.exit_code() == 2));
        assert_eq!(parse_mode("scale+eucl").unwrap(), SimilarityMode::ScaledEuclidean);
        assert!(parse_mode("cosine").is_err());
    }

    #[test]
    fn lists_and_paths() {
        assert_eq!(comma_list(" a, b,,c "), vec!["a", "b", "c"]);
        assert_eq!(with_extension(Path::new("x/lat.mvx"), ".ids"), PathBuf::from("x/lat.mvx.ids"));
    }
}
