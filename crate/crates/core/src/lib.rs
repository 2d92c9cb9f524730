//! Multi-view canonical correlation analysis for cross-modal retrieval.
//!
//! Visual features, tag vectors and semantic indicators are mapped into one
//! latent space by a regularized multi-view CCA over explicit kernel feature
//! maps. Retrieval in that space ranks by normalized correlation after
//! scaling each latent dimension by a power of its eigenvalue.
//!
//! Module map:
//! - [`linalg`]: sparse matrices, generalized symmetric eigensolver, PCA, truncated SVD
//! - [`kernel_maps`]: random Fourier features, square-root map, feature assembly
//! - [`text_view`]: tag vocabulary, binary/tf-idf tag matrices, SVD compression
//! - [`semantics`]: k-means, normalized cuts, NMF and pLSA topic indicators
//! - [`cca`]: model fitting, single-view projection, dimension selection
//! - [`retrieval`]: similarity, latent index, search, annotation, precision metrics
//! - [`harness`]: synthetic data, baselines, experiments, on-disk formats

pub mod cca;
pub mod error;
pub mod harness;
pub mod kernel_maps;
pub mod linalg;
pub mod retrieval;
pub mod semantics;
pub mod text_view;

pub use error::{Error, Result};

/// Dense row-per-item matrix used throughout the crate.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
