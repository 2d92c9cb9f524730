//! Explicit kernel feature maps and assembly of several mapped visual
//! features into one centered matrix.
//!
//! Concatenating mapped blocks realizes the sum of the block kernels, i.e.
//! their average up to the block count. CCA is invariant to a global
//! per-view scale, so no `1/√m` factor is applied.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{center_columns, ensure_finite, pca_fit, PcaModel};
use crate::{Error, Result};

/// Mean Euclidean distance from each sampled row to its `k`-th nearest
/// other sampled row.
///
/// At most `sample` rows are used, drawn without replacement from `seed`.
/// A zero result is returned as is; callers fitting a Gaussian map must
/// reject it.
pub fn estimate_sigma(x: &DMatrix<f64>, k: usize, sample: usize, seed: u64) -> Result<f64> {
    let n = x.nrows();
    let rows: Vec<usize> = if n > sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, sample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    if k == 0 || rows.len() < k + 1 {
        return Err(Error::validation(format!(
            "sigma estimation needs at least {} rows, have {}",
            k + 1,
            rows.len()
        )));
    }
    let sub = x.select_rows(&rows);
    let sq_norms: Vec<f64> = sub.row_iter().map(|r| r.norm_squared()).collect();
    let gram = &sub * sub.transpose();
    let m = rows.len();
    let mut total = 0.0;
    let mut dists = Vec::with_capacity(m - 1);
    for i in 0..m {
        dists.clear();
        for j in 0..m {
            if j != i {
                let d2 = sq_norms[i] + sq_norms[j] - 2.0 * gram[(i, j)];
                dists.push(d2.max(0.0));
            }
        }
        let (_, kth, _) = dists.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        total += kth.sqrt();
    }
    Ok(total / m as f64)
}

/// Random Fourier feature map for the Gaussian kernel with bandwidth `sigma`.
///
/// Outputs `√(2/D) · [cos ω₁ᵀx, sin ω₁ᵀx, cos ω₂ᵀx, …]` so the self-kernel is
/// exactly one. Frequencies are regenerated from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    pub input_dim: usize,
    pub output_dim: usize,
    pub sigma: f64,
    pub seed: u64,
    /// `input_dim × output_dim/2`.
    pub frequencies: DMatrix<f64>,
}

pub fn rff_fit(input_dim: usize, output_dim: usize, sigma: f64, seed: u64) -> Result<RffMap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::validation(format!(
            "RFF bandwidth must be positive, got {sigma}"
        )));
    }
    if output_dim < 2 || !output_dim.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "RFF output dimension must be even and at least 2, got {output_dim}"
        )));
    }
    if input_dim == 0 {
        return Err(Error::validation("RFF input dimension must be positive"));
    }
    let normal = Normal::new(0.0, 1.0 / sigma)
        .map_err(|e| Error::validation(format!("bad RFF bandwidth: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frequencies = DMatrix::from_fn(input_dim, output_dim / 2, |_, _| normal.sample(&mut rng));
    Ok(RffMap {
        input_dim,
        output_dim,
        sigma,
        seed,
        frequencies,
    })
}

impl RffMap {
    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::validation(format!(
                "RFF expects length {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let row = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.apply_matrix(&row)?.row(0).transpose())
    }

    /// Maps every row of `x`.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::validation(format!(
                "RFF expects {} columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        let proj = x * &self.frequencies;
        let scale = (2.0 / self.output_dim as f64).sqrt();
        let mut out = DMatrix::zeros(x.nrows(), self.output_dim);
        for j in 0..proj.ncols() {
            for i in 0..x.nrows() {
                let (s, c) = proj[(i, j)].sin_cos();
                out[(i, 2 * j)] = scale * c;
                out[(i, 2 * j + 1)] = scale * s;
            }
        }
        Ok(out)
    }
}

/// Term-wise square root: the exact feature map of the Bhattacharyya kernel.
pub fn sqrt_map(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 || !v.is_finite() {
                Err(Error::validation(format!(
                    "square-root map needs nonnegative input, entry {i} is {v}"
                )))
            } else {
                Ok(v.sqrt())
            }
        })
        .collect()
}

pub fn sqrt_map_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(pos) = x.iter().position(|&v| v < 0.0 || !v.is_finite()) {
        let n = x.nrows().max(1);
        return Err(Error::validation(format!(
            "square-root map needs nonnegative input, entry ({}, {}) is {}",
            pos % n,
            pos / n,
            x.iter().nth(pos).unwrap()
        )));
    }
    Ok(x.map(f64::sqrt))
}

/// Requested kernel map for one raw feature block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// Gaussian kernel through random Fourier features. A missing `sigma`
    /// is estimated from the data.
    Rff {
        output_dim: usize,
        sigma: Option<f64>,
        seed: u64,
    },
    /// Bhattacharyya kernel on histograms.
    Sqrt,
    /// Linear kernel.
    Identity,
}

/// A kernel map after fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedMap {
    Rff(RffMap),
    Sqrt,
    Identity,
}

impl FittedMap {
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            FittedMap::Rff(m) => m.apply_matrix(x),
            FittedMap::Sqrt => sqrt_map_matrix(x),
            FittedMap::Identity => Ok(x.clone()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FittedMap::Rff(_) => "rff",
            FittedMap::Sqrt => "sqrt",
            FittedMap::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledBlock {
    pub map: FittedMap,
    pub input_dim: usize,
    pub pca: PcaModel,
}

impl AssembledBlock {
    pub fn dim(&self) -> usize {
        self.pca.output_dim()
    }
}

/// Replayable transform: map each block, reduce it by PCA, concatenate,
/// then subtract the training means.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAssembly {
    pub blocks: Vec<AssembledBlock>,
    pub global_means: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Neighbor rank used when estimating an RFF bandwidth.
    pub sigma_neighbors: usize,
    /// Row cap for bandwidth estimation.
    pub sigma_sample: usize,
    pub sigma_seed: u64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            sigma_neighbors: 50,
            sigma_sample: 2000,
            sigma_seed: 0,
        }
    }
}

fn check_rows(blocks: &[DMatrix<f64>]) -> Result<usize> {
    let n = blocks.first().map_or(0, |b| b.nrows());
    if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.nrows() != n) {
        return Err(Error::validation(format!(
            "feature block {i} has {} rows, expected {n}",
            b.nrows()
        )));
    }
    Ok(n)
}

fn concat_columns(parts: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(n, total);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(p);
        at += p.ncols();
    }
    out
}

/// Fits the kernel maps and per-block PCA on training blocks and returns
/// the assembled, centered training features together with the transform.
pub fn assemble_features(
    blocks: &[DMatrix<f64>],
    kinds: &[MapKind],
    per_block_pca_dim: usize,
    opts: &AssemblyOptions,
) -> Result<(DMatrix<f64>, FeatureAssembly)> {
    assemble_features_with_dims(blocks, kinds, &vec![per_block_pca_dim; blocks.len()], opts)
}

/// [`assemble_features`] with a PCA dimension per block.
pub fn assemble_features_with_dims(
    blocks: &[DMatrix<f64>],
    kinds: &[MapKind],
    pca_dims: &[usize],
    opts: &AssemblyOptions,
) -> Result<(DMatrix<f64>, FeatureAssembly)> {
    if blocks.is_empty() {
        return Err(Error::validation("no feature blocks given"));
    }
    if blocks.len() != kinds.len() || blocks.len() != pca_dims.len() {
        return Err(Error::validation(format!(
            "{} feature blocks but {} map kinds and {} PCA dimensions",
            blocks.len(),
            kinds.len(),
            pca_dims.len()
        )));
    }
    let n = check_rows(blocks)?;
    let mut fitted = Vec::with_capacity(blocks.len());
    let mut reduced = Vec::with_capacity(blocks.len());
    for (i, ((x, kind), &per_block_pca_dim)) in blocks.iter().zip(kinds).zip(pca_dims).enumerate() {
        ensure_finite(x, &format!("feature block {i}"))?;
        let map = match kind {
            MapKind::Rff {
                output_dim,
                sigma,
                seed,
            } => {
                let sigma = match sigma {
                    Some(s) => *s,
                    None => {
                        let s = estimate_sigma(
                            x,
                            opts.sigma_neighbors.min(n.saturating_sub(1)).max(1),
                            opts.sigma_sample,
                            opts.sigma_seed,
                        )?;
                        if s <= 0.0 {
                            return Err(Error::validation(format!(
                                "feature block {i}: estimated RFF bandwidth is zero (duplicate rows?)"
                            )));
                        }
                        s
                    }
                };
                FittedMap::Rff(rff_fit(x.ncols(), *output_dim, sigma, *seed)?)
            }
            MapKind::Sqrt => FittedMap::Sqrt,
            MapKind::Identity => FittedMap::Identity,
        };
        let mapped = map.apply_matrix(x)?;
        if per_block_pca_dim > mapped.ncols() {
            return Err(Error::validation(format!(
                "feature block {i}: PCA dimension {per_block_pca_dim} exceeds mapped dimension {}",
                mapped.ncols()
            )));
        }
        let pca = pca_fit(&mapped, per_block_pca_dim)?;
        reduced.push(pca.apply(&mapped)?);
        fitted.push(AssembledBlock {
            map,
            input_dim: x.ncols(),
            pca,
        });
    }
    let (centered, global_means) = center_columns(&concat_columns(&reduced, n));
    Ok((
        centered,
        FeatureAssembly {
            blocks: fitted,
            global_means,
        },
    ))
}

impl FeatureAssembly {
    pub fn output_dim(&self) -> usize {
        self.global_means.len()
    }

    pub fn block_input_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.input_dim).collect()
    }

    /// Replays the fitted transform on new rows.
    pub fn transform(&self, blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        if blocks.len() != self.blocks.len() {
            return Err(Error::validation(format!(
                "expected {} feature blocks, got {}",
                self.blocks.len(),
                blocks.len()
            )));
        }
        let n = check_rows(blocks)?;
        let mut parts = Vec::with_capacity(blocks.len());
        for (i, (x, b)) in blocks.iter().zip(&self.blocks).enumerate() {
            if x.ncols() != b.input_dim {
                return Err(Error::validation(format!(
                    "feature block {i} has {} columns, expected {}",
                    x.ncols(),
                    b.input_dim
                )));
            }
            parts.push(b.pca.apply(&b.map.apply_matrix(x)?)?);
        }
        let mut out = concat_columns(&parts, n);
        let mt = self.global_means.transpose();
        for mut row in out.row_iter_mut() {
            row -= &mt;
        }
        Ok(out)
    }

    /// Transform for a single item given one raw vector per block.
    pub fn transform_row(&self, blocks: &[Vec<f64>]) -> Result<DVector<f64>> {
        let mats: Vec<DMatrix<f64>> = blocks
            .iter()
            .map(|b| DMatrix::from_row_slice(1, b.len(), b))
            .collect();
        Ok(self.transform(&mats)?.row(0).transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(seed: u64, n: usize, d: usize, scale: f64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-scale..scale))
    }

    fn random_histograms(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
        for mut r in m.row_iter_mut() {
            let s = r.sum();
            r /= s;
        }
        m
    }

    #[test]
    fn sigma_degenerate_cases() {
        let same = DMatrix::from_element(51, 3, 2.5);
        assert_eq!(estimate_sigma(&same, 50, 2000, 0).unwrap(), 0.0);
        let mut two = DMatrix::zeros(6, 2);
        for i in 3..6 {
            two[(i, 0)] = 10.0;
        }
        assert_eq!(estimate_sigma(&two, 1, 2000, 0).unwrap(), 0.0);
        assert!(estimate_sigma(&same, 51, 2000, 0).is_err());
    }

    #[test]
    fn sigma_matches_all_pairs_oracle() {
        let x = random_points(4, 200, 10, 1.0);
        let mut total = 0.0;
        for i in 0..200 {
            let mut d: Vec<f64> = (0..200)
                .filter(|&j| j != i)
                .map(|j| {
                    (0..10)
                        .map(|c| (x[(i, c)] - x[(j, c)]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            d.sort_by(|a, b| a.total_cmp(b));
            total += d[49];
        }
        let oracle = total / 200.0;
        let got = estimate_sigma(&x, 50, 2000, 0).unwrap();
        assert!((got - oracle).abs() < 1e-12 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn rff_determinism_and_shape() {
        let a = rff_fit(5, 16, 1.3, 42).unwrap();
        let b = rff_fit(5, 16, 1.3, 42).unwrap();
        assert_eq!(a.frequencies, b.frequencies);
        let one = rff_fit(1, 2, 1.0, 0).unwrap();
        assert_eq!(one.frequencies.shape(), (1, 1));
        assert!(rff_fit(1, 2, 0.0, 0).is_err());
        assert!(rff_fit(1, 3, 1.0, 0).is_err());
        assert!(a.apply(&[1.0; 4]).is_err());
    }

    #[test]
    fn rff_frequency_spread() {
        let m = rff_fit(1, 6000, 2.0, 9).unwrap();
        let vals: Vec<f64> = m.frequencies.iter().copied().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var.sqrt() - 0.5).abs() <= 0.05);
    }

    #[test]
    fn rff_self_kernel_is_one() {
        let m = rff_fit(4, 64, 0.7, 1).unwrap();
        let x = random_points(2, 30, 4, 5.0);
        let mapped = m.apply_matrix(&x).unwrap();
        for r in mapped.row_iter() {
            assert!((r.norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sqrt_map_examples() {
        assert_eq!(sqrt_map(&[0.25; 4]).unwrap(), vec![0.5; 4]);
        let a = sqrt_map(&[1.0, 0.0]).unwrap();
        let b = sqrt_map(&[0.0, 1.0]).unwrap();
        assert_eq!(a[0] * b[0] + a[1] * b[1], 0.0);
        match sqrt_map(&[0.1, -0.2]) {
            Err(Error::Validation(msg)) => assert!(msg.contains("entry 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sqrt_map_reproduces_bhattacharyya() {
        let h = random_histograms(3, 20, 12);
        for i in 0..20 {
            for j in 0..20 {
                let x: Vec<f64> = h.row(i).iter().copied().collect();
                let y: Vec<f64> = h.row(j).iter().copied().collect();
                let direct: f64 = x.iter().zip(&y).map(|(a, b)| (a * b).sqrt()).sum();
                let fx = sqrt_map(&x).unwrap();
                let fy = sqrt_map(&y).unwrap();
                let mapped: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
                assert!((direct - mapped).abs() <= 10.0 * f64::EPSILON);
            }
        }
    }

    #[test]
    fn single_identity_block_is_centered_input() {
        let x = random_points(5, 12, 3, 2.0);
        let (out, asm) = assemble_features(std::slice::from_ref(&x), &[MapKind::Identity], 3, &Default::default()).unwrap();
        // Full PCA is a rotation, so Gram matrices agree with the centered input.
        let (c, _) = center_columns(&x);
        assert!((&out * out.transpose() - &c * c.transpose()).amax() < 1e-10);
        for col in out.column_iter() {
            assert!(col.mean().abs() <= 1e-10);
        }
        let replay = asm.transform(&[x]).unwrap();
        assert!((replay - out).amax() < 1e-12);
    }

    #[test]
    fn identical_blocks_give_identical_columns() {
        let h = random_histograms(6, 25, 8);
        let (out, asm) = assemble_features(
            &[h.clone(), h.clone()],
            &[MapKind::Sqrt, MapKind::Sqrt],
            4,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(asm.output_dim(), 8);
        assert!((out.columns(0, 4) - out.columns(4, 4)).amax() < 1e-14);
        assert!(assemble_features(&[h.clone(), h.rows(0, 3).into_owned()], &[MapKind::Sqrt, MapKind::Sqrt], 2, &Default::default()).is_err());
    }

    #[test]
    fn assembled_gram_matches_average_centered_kernel() {
        let h1 = random_histograms(7, 40, 6);
        let h2 = random_histograms(8, 40, 6);
        let (out, _) = assemble_features(
            &[h1.clone(), h2.clone()],
            &[MapKind::Sqrt, MapKind::Sqrt],
            6,
            &Default::default(),
        )
        .unwrap();
        // Oracle: Bhattacharyya kernels evaluated directly, double-centered,
        // averaged over the two features.
        let n = 40;
        let kernel = |h: &DMatrix<f64>| {
            DMatrix::from_fn(n, n, |i, j| {
                (0..h.ncols()).map(|c| (h[(i, c)] * h[(j, c)]).sqrt()).sum::<f64>()
            })
        };
        let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let avg = (&centering * (kernel(&h1) + kernel(&h2)) * &centering) * 0.5;
        let gram = &out * out.transpose();
        let a: Vec<f64> = gram.iter().copied().collect();
        let b: Vec<f64> = avg.iter().copied().collect();
        let corr = pearson(&a, &b);
        assert!(corr >= 0.999, "{corr}");
        // Up to the global factor m = 2.
        assert!((gram - avg * 2.0).amax() < 1e-10);
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
