//! Synthetic data, the structural-learning baseline, experiment
//! orchestration, and on-disk formats.

pub mod dataset;
pub mod experiment;
pub mod export;
pub mod formats;
pub mod model_io;
pub mod pipeline;
pub mod structural;
pub mod synth;

pub use dataset::{Dataset, DatasetManifest, Splits};
pub use experiment::{fit_selected, run_experiment, ExperimentConfig, ExperimentReport, ModelSpec, SelectedModel, Task};
pub use export::{export_latent_2d, LatentPoint};
pub use model_io::{load_index, load_model, save_index, save_model, ModelMeta};
pub use structural::{structural_learning_embed, StructuralModel};
pub use synth::{generate_three_view, SynthConfig};
