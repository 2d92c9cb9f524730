//! Planted-topic three-view data.
//!
//! Each item draws a topic `z` and one level for each nuisance group. Its
//! visual vector is the topic prototype plus noise: nuisance directions
//! (one per group level) and isotropic Gaussian noise, both scaled by
//! `visual_noise`. Tags come from the topic's pool on a ring of tags, so
//! neighboring topics share part of their vocabulary, plus the topic's
//! name tag, background tags at the tag noise rate, and one tag per
//! nuisance group. Keywords are the topic name plus, at the keyword noise
//! rate, one other topic name.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Splits};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub topics: usize,
    pub visual_dim: usize,
    /// Bins of an extra histogram block; 0 leaves it out.
    pub histogram_bins: usize,
    /// Tags on the topic ring.
    pub tag_vocab: usize,
    pub background_tags: usize,
    /// Mean number of topic tag draws per item.
    pub tags_per_item: f64,
    /// Fraction of a topic's pool shared with the next topic.
    pub topic_overlap: f64,
    /// Rate at which topic tag draws become background tags; also the
    /// rate at which the topic name tag is left out.
    pub tag_noise: f64,
    pub keyword_noise: f64,
    pub visual_noise: f64,
    pub nuisance_groups: usize,
    pub nuisance_levels: usize,
    /// Length of a nuisance direction relative to the isotropic noise.
    pub nuisance_strength: f64,
    /// Rate at which an item carries its nuisance level tags.
    pub nuisance_tag_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 20000,
            topics: 10,
            visual_dim: 64,
            histogram_bins: 16,
            tag_vocab: 300,
            background_tags: 100,
            tags_per_item: 8.0,
            topic_overlap: 0.3,
            tag_noise: 0.2,
            keyword_noise: 0.1,
            visual_noise: 3.0,
            nuisance_groups: 2,
            nuisance_levels: 8,
            nuisance_strength: 0.6,
            nuisance_tag_rate: 0.4,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n", self.n),
            ("topics", self.topics),
            ("visual_dim", self.visual_dim),
            ("tag_vocab", self.tag_vocab),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::validation(format!("{name} must be at least 1")));
        }
        for (name, r) in [
            ("topic_overlap", self.topic_overlap),
            ("tag_noise", self.tag_noise),
            ("keyword_noise", self.keyword_noise),
            ("nuisance_tag_rate", self.nuisance_tag_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if !(self.visual_noise >= 0.0) || !(self.nuisance_strength >= 0.0) || !(self.tags_per_item >= 0.0) {
            return Err(Error::validation("noise scales and tag rate must be nonnegative"));
        }
        if self.tag_noise > 0.0 && self.background_tags == 0 {
            return Err(Error::validation("tag noise needs background tags"));
        }
        if self.nuisance_groups > 0 && self.nuisance_levels == 0 {
            return Err(Error::validation("nuisance groups need at least one level"));
        }
        let directions = self.topics + self.nuisance_groups * self.nuisance_levels;
        if directions > self.visual_dim {
            return Err(Error::validation(format!(
                "visual_dim {} cannot hold {directions} orthogonal prototype and nuisance directions",
                self.visual_dim
            )));
        }
        if self.tag_vocab < self.topics {
            return Err(Error::validation("tag_vocab must be at least the number of topics"));
        }
        Ok(())
    }
}

pub fn topic_name(z: usize) -> String {
    format!("topic{z:02}")
}

/// Random orthonormal columns.
fn orthonormal(dim: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, k, |_, _| StandardNormal.sample(rng));
    let mut q = g.qr().q();
    for j in 0..k {
        if q.column(j).iter().fold(0.0, |a: f64, &v: &f64| if v.abs() > a.abs() { v } else { a }) < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn dirichlet_ones(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let g = Gamma::new(1.0, 1.0).expect("valid gamma");
    let v = DVector::from_fn(k, |_, _| g.sample(rng));
    let s = v.sum();
    v / s
}

/// Generates the dataset, with planted labels and proportional splits.
pub fn generate_three_view(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.topics;
    let groups = cfg.nuisance_groups;
    let levels = cfg.nuisance_levels;
    let basis = orthonormal(cfg.visual_dim, c + groups * levels, &mut rng);
    let profiles: Vec<DVector<f64>> = (0..c).map(|_| dirichlet_ones(cfg.histogram_bins, &mut rng)).collect();

    let ring: Vec<String> = (0..cfg.tag_vocab).map(|i| format!("tag{i:03}")).collect();
    let background: Vec<String> = (0..cfg.background_tags).map(|i| format!("misc{i:03}")).collect();
    let stride = (cfg.tag_vocab / c).max(1);
    let pool_len = ((stride as f64 * (1.0 + cfg.topic_overlap)).round() as usize).clamp(1, cfg.tag_vocab);
    let pools: Vec<Vec<&String>> = (0..c)
        .map(|z| (0..pool_len).map(|k| &ring[(z * stride + k) % cfg.tag_vocab]).collect())
        .collect();
    let poisson = (cfg.tags_per_item > 0.0).then(|| Poisson::new(cfg.tags_per_item).expect("positive rate"));

    let width = cfg.n.saturating_sub(1).to_string().len().max(5);
    let mut ids = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    let mut tags = Vec::with_capacity(cfg.n);
    let mut keywords = Vec::with_capacity(cfg.n);
    let mut visual = DMatrix::zeros(cfg.n, cfg.visual_dim);
    let mut hist = DMatrix::zeros(cfg.n, cfg.histogram_bins);
    let noise_sd = 1.0 / (cfg.visual_dim as f64).sqrt();
    let hist_mix = cfg.visual_noise / (1.0 + cfg.visual_noise);

    for i in 0..cfg.n {
        ids.push(format!("img{i:0width$}"));
        let z = rng.random_range(0..c);
        labels.push(z);
        let nuisance: Vec<usize> = (0..groups).map(|_| rng.random_range(0..levels)).collect();

        let mut x = basis.column(z).into_owned();
        for (g, &l) in nuisance.iter().enumerate() {
            x += basis.column(c + g * levels + l) * (cfg.visual_noise * cfg.nuisance_strength);
        }
        for v in x.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += cfg.visual_noise * noise_sd * e;
        }
        visual.row_mut(i).copy_from(&x.transpose());
        if cfg.histogram_bins > 0 {
            let h = &profiles[z] * (1.0 - hist_mix) + dirichlet_ones(cfg.histogram_bins, &mut rng) * hist_mix;
            hist.row_mut(i).copy_from(&h.transpose());
        }

        let mut item_tags: Vec<String> = Vec::new();
        let draws = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..draws {
            let t = if rng.random::<f64>() < cfg.tag_noise {
                background.choose(&mut rng).expect("background tags")
            } else {
                *pools[z].choose(&mut rng).expect("non-empty pool")
            };
            item_tags.push(t.clone());
        }
        if rng.random::<f64>() >= cfg.tag_noise {
            item_tags.push(topic_name(z));
        }
        for (g, &l) in nuisance.iter().enumerate() {
            if rng.random::<f64>() < cfg.nuisance_tag_rate {
                item_tags.push(format!("style{g}v{l}"));
            }
        }
        item_tags.sort();
        item_tags.dedup();
        tags.push(item_tags);

        let mut kws = vec![topic_name(z)];
        if c > 1 && rng.random::<f64>() < cfg.keyword_noise {
            let other = (z + rng.random_range(1..c)) % c;
            kws.push(topic_name(other));
        }
        keywords.push(kws);
    }

    let mut blocks = vec![visual];
    if cfg.histogram_bins > 0 {
        blocks.push(hist);
    }
    Ok(Dataset {
        ids,
        visual: blocks,
        tags,
        keywords: Some(keywords),
        labels: Some(labels),
        splits: Some(Splits::proportional(cfg.n, cfg.seed.wrapping_add(1))?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 600,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_three_view(&small()).unwrap();
        let b = generate_three_view(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_three_view(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.visual[0], c.visual[0]);
    }

    #[test]
    fn shapes_and_ranges() {
        let cfg = small();
        let ds = generate_three_view(&cfg).unwrap();
        ds.validate().unwrap();
        assert_eq!(ds.visual[0].shape(), (600, 64));
        assert_eq!(ds.visual[1].shape(), (600, 16));
        for r in ds.visual[1].row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12 && r.iter().all(|&v| v >= 0.0));
        }
        let labels = ds.labels.as_ref().unwrap();
        assert!(labels.iter().all(|&z| z < cfg.topics));
        for (kws, &z) in ds.keywords.as_ref().unwrap().iter().zip(labels) {
            assert_eq!(kws[0], topic_name(z));
        }
        assert_eq!(ds.ids[0], "img00000");
    }

    #[test]
    fn zero_noise_is_exact() {
        let cfg = SynthConfig {
            tag_noise: 0.0,
            keyword_noise: 0.0,
            visual_noise: 0.0,
            ..small()
        };
        let ds = generate_three_view(&cfg).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        for i in 0..ds.n_items() {
            for j in 0..i {
                let same = (ds.visual[0].row(i) - ds.visual[0].row(j)).norm() < 1e-12;
                assert_eq!(same, labels[i] == labels[j]);
            }
            assert!(ds.tags[i].contains(&topic_name(labels[i])));
            assert_eq!(ds.keywords.as_ref().unwrap()[i].len(), 1);
        }
    }

    #[test]
    fn neighboring_topics_share_tags() {
        let cfg = SynthConfig {
            tag_noise: 0.0,
            tags_per_item: 30.0,
            ..small()
        };
        let ds = generate_three_view(&cfg).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        let vocab_of = |z: usize| -> HashSet<&String> {
            (0..ds.n_items())
                .filter(|&i| labels[i] == z)
                .flat_map(|i| ds.tags[i].iter().filter(|t| t.starts_with("tag")))
                .collect()
        };
        assert!(vocab_of(0).intersection(&vocab_of(1)).count() > 0);
        assert_eq!(vocab_of(0).intersection(&vocab_of(5)).count(), 0);
    }

    #[test]
    fn invalid_configs() {
        assert!(SynthConfig { n: 0, ..small() }.validate().is_err());
        assert!(SynthConfig { tag_noise: 1.5, ..small() }.validate().is_err());
        assert!(SynthConfig { visual_dim: 8, ..small() }.validate().is_err());
    }
}
