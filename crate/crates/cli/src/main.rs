use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "mvcca", version, about = "Multi-view CCA embeddings for cross-modal image and tag retrieval")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-topic three-view dataset.
    Synth(SynthArgs),
    /// Build the tag vocabulary of a dataset split.
    BuildVocab(VocabArgs),
    /// Fit the visual and tag preprocessing and write feature matrices.
    Featurize(FeaturizeArgs),
    /// Cluster items by their tags (or visual features).
    ClusterTags(ClusterArgs),
    /// Fit a multi-view CCA model.
    Fit(FitArgs),
    /// Project items of one view into the latent space.
    Project(ProjectArgs),
    /// Build a search index over projected items.
    Index(IndexArgs),
    /// Search an index with tags, keywords or an item's image.
    Search(SearchArgs),
    /// Transfer tags to images from their nearest indexed neighbors.
    Annotate(AnnotateArgs),
    /// Score one retrieval task on held-out queries.
    Eval(EvalArgs),
    /// Run the full train / validate / test comparison.
    Experiment(ExperimentArgs),
    /// Write the first two latent coordinates per item as TSV.
    #[command(name = "export-2d")]
    Export2d(ExportArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the dataset.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub visual_dim: Option<usize>,
    #[arg(long)]
    pub tags_per_item: Option<f64>,
    #[arg(long)]
    pub tag_noise: Option<f64>,
    #[arg(long)]
    pub keyword_noise: Option<f64>,
    #[arg(long)]
    pub visual_noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Vocabulary file, one `term<TAB>document frequency` per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Split to count over; defaults to train when the dataset has splits.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub max_terms: Option<usize>,
}

#[derive(Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split the preprocessing is fit on.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    pub rff_dim: Option<usize>,
    #[arg(long)]
    pub tag_dim: Option<usize>,
    #[arg(long)]
    pub tfidf: bool,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Assignment file, one `id<TAB>cluster` per line.
    #[arg(long)]
    pub out: PathBuf,
    /// nc, kmeans, nmf, plsa or visual_kmeans.
    #[arg(long, default_value = "nc")]
    pub method: String,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub tag_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model directory.
    #[arg(long)]
    pub out: PathBuf,
    /// V+T, V+K, V+T+K, V+C or V+T+C.
    #[arg(long, default_value = "V+T")]
    pub views: String,
    /// Cluster source for C views.
    #[arg(long)]
    pub clusters: Option<String>,
    /// Cluster count for C views; several values are tuned on validation.
    #[arg(long, value_delimiter = ',')]
    pub cluster_count: Option<Vec<usize>>,
    /// Latent dimension; chosen on the validation split when left out.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// visual, text or semantic.
    #[arg(long, default_value = "visual")]
    pub view: String,
    #[arg(long)]
    pub split: Option<String>,
    /// Cluster assignments, for semantic views built from clusters.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Latent matrix (`MVX1`); item ids go to the same path with `.ids`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "visual")]
    pub view: String,
    #[arg(long, default_value = "database")]
    pub split: String,
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Eigenvalue power; defaults to the model's.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Comma-separated query tags.
    #[arg(long, conflicts_with_all = ["item", "keywords"])]
    pub tags: Option<String>,
    /// Per-tag weights as `tag=weight`, for tag queries.
    #[arg(long = "weight", value_parser = parse_weight)]
    pub weights: Vec<(String, f64)>,
    /// Comma-separated query keywords.
    #[arg(long, conflicts_with = "item")]
    pub keywords: Option<String>,
    /// Query with this item's image; needs --dataset.
    #[arg(long, requires = "dataset")]
    pub item: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// scale+corr, scale+eucl or eucl.
    #[arg(long, default_value = "scale+corr")]
    pub mode: String,
}

#[derive(Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Items to annotate; the whole split when left out.
    #[arg(long)]
    pub item: Vec<String>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 50)]
    pub neighbors: usize,
    #[arg(long, default_value_t = 5)]
    pub tags: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// I2I, T2I, K2I or I2T.
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Cutoff; defaults to precision_at (keyword_precision_at for K2I).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub tags: Option<usize>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest; synthesized from the config's `synth` section
    /// when left out.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Report path; stdout when left out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Synthetic item count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub synth_seed: Option<u64>,
    #[arg(long)]
    pub precision_at: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Comma-separated views to export.
    #[arg(long, default_value = "visual,text", value_delimiter = ',')]
    pub views: Vec<String>,
    #[arg(long)]
    pub assignments: Option<PathBuf>,
}

fn parse_weight(s: &str) -> Result<(String, f64), String> {
    let (t, w) = s.split_once('=').ok_or("expected tag=weight")?;
    let w: f64 = w.parse().map_err(|_| format!("bad weight {w:?}"))?;
    Ok((t.to_string(), w))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::BuildVocab(a) => commands::build_vocab(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::ClusterTags(a) => commands::cluster_tags(a),
        Command::Fit(a) => commands::fit(a),
        Command::Project(a) => commands::project(a),
        Command::Index(a) => commands::index(a),
        Command::Search(a) => commands::search(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Export2d(a) => commands::export_2d(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
