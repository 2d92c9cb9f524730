//! Datasets on disk: a JSON manifest naming the item list, visual feature
//! blocks, tag corpus, keywords, planted labels and splits.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::formats::{
    read_assignments, read_dense, read_ids, read_keyed_lists, write_assignments, write_dense, write_ids,
    write_keyed_lists,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPaths {
    pub train: String,
    pub database: String,
    pub validation: String,
    pub test: String,
}

/// Paths are relative to the manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub items: String,
    pub visual: Vec<String>,
    pub tags: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitPaths>,
}

/// Row indices of each split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub database: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Shuffled split with 5% test, 5% validation, 30% database, and the
    /// rest for training (12000/6000/1000/1000 at n = 20000).
    pub fn proportional(n: usize, seed: u64) -> Result<Splits> {
        if n < 4 {
            return Err(Error::validation(format!("need at least 4 items to split, got {n}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let small = ((n as f64 * 0.05).round() as usize).max(1);
        let db_len = ((n as f64 * 0.3).round() as usize).max(1);
        let mut at = 0;
        let mut take = |k: usize| {
            let mut part = order[at..at + k].to_vec();
            part.sort_unstable();
            at += k;
            part
        };
        let test = take(small);
        let validation = take(small);
        let database = take(db_len);
        let train = take(n - 2 * small - db_len);
        Ok(Splits {
            train,
            database,
            validation,
            test,
        })
    }

    pub fn check_disjoint(&self, n: usize) -> Result<()> {
        let mut seen = vec![None; n];
        for (name, part) in self.named() {
            for &i in part {
                if i >= n {
                    return Err(Error::validation(format!("{name} split row {i} out of range")));
                }
                if let Some(other) = seen[i] {
                    return Err(Error::validation(format!("row {i} is in both {other} and {name} splits")));
                }
                seen[i] = Some(name);
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &[usize]); 4] {
        [
            ("train", &self.train),
            ("database", &self.database),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }

    pub fn by_name(&self, name: &str) -> Result<&[usize]> {
        self.named()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::validation(format!("unknown split {name:?}")))
    }
}

/// An item-aligned dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    /// Raw visual feature blocks, one row per item.
    pub visual: Vec<DMatrix<f64>>,
    pub tags: Vec<Vec<String>>,
    pub keywords: Option<Vec<Vec<String>>>,
    pub labels: Option<Vec<usize>>,
    pub splits: Option<Splits>,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn align<T: Clone + Default>(ids: &[String], rows: Vec<(String, T)>, what: &str) -> Result<Vec<T>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut out = vec![T::default(); ids.len()];
    let mut seen = vec![false; ids.len()];
    for (id, v) in rows {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::validation(format!("{what} names unknown item {id:?}")))?;
        if seen[i] {
            return Err(Error::validation(format!("{what} lists item {id:?} twice")));
        }
        seen[i] = true;
        out[i] = v;
    }
    Ok(out)
}

impl Dataset {
    pub fn n_items(&self) -> usize {
        self.ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        let unique: HashSet<&String> = self.ids.iter().collect();
        if unique.len() != n {
            return Err(Error::validation("item ids are not unique"));
        }
        if self.visual.is_empty() {
            return Err(Error::validation("dataset has no visual feature blocks"));
        }
        for (b, m) in self.visual.iter().enumerate() {
            if m.nrows() != n {
                return Err(Error::validation(format!("visual block {b} has {} rows for {n} items", m.nrows())));
            }
        }
        if self.tags.len() != n {
            return Err(Error::validation("tag corpus is not aligned with the item list"));
        }
        if self.keywords.as_ref().is_some_and(|k| k.len() != n) || self.labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::validation("keywords or labels are not aligned with the item list"));
        }
        if let Some(s) = &self.splits {
            s.check_disjoint(n)?;
        }
        Ok(())
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
        let manifest_path = manifest_path.as_ref();
        let manifest: DatasetManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let ids = read_ids(resolve(base, &manifest.items))?;
        let visual = manifest
            .visual
            .iter()
            .map(|p| read_dense(resolve(base, p)))
            .collect::<Result<Vec<_>>>()?;
        let tags = align(&ids, read_keyed_lists(resolve(base, &manifest.tags))?, "tag corpus")?;
        let keywords = manifest
            .keywords
            .as_ref()
            .map(|p| align(&ids, read_keyed_lists(resolve(base, p))?, "keyword file"))
            .transpose()?;
        let labels = manifest
            .labels
            .as_ref()
            .map(|p| -> Result<Vec<usize>> {
                let rows = read_assignments(resolve(base, p))?;
                let present: HashSet<&str> = rows.iter().map(|(id, _)| id.as_str()).collect();
                if let Some(missing) = ids.iter().find(|id| !present.contains(id.as_str())) {
                    return Err(Error::validation(format!("label file is missing item {missing:?}")));
                }
                align(&ids, rows, "label file")
            })
            .transpose()?;
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let splits = manifest
            .splits
            .as_ref()
            .map(|s| -> Result<Splits> {
                let rows = |p: &str, name: &str| -> Result<Vec<usize>> {
                    read_ids(resolve(base, p))?
                        .iter()
                        .map(|id| {
                            index.get(id.as_str()).copied().ok_or_else(|| {
                                Error::validation(format!("{name} split names unknown item {id:?}"))
                            })
                        })
                        .collect()
                };
                Ok(Splits {
                    train: rows(&s.train, "train")?,
                    database: rows(&s.database, "database")?,
                    validation: rows(&s.validation, "validation")?,
                    test: rows(&s.test, "test")?,
                })
            })
            .transpose()?;
        let ds = Dataset {
            ids,
            visual,
            tags,
            keywords,
            labels,
            splits,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes all parts into `dir` and returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.validate()?;
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_ids(dir.join("items.txt"), &self.ids)?;
        let mut visual = Vec::new();
        for (b, m) in self.visual.iter().enumerate() {
            let name = format!("visual{b}.mvx");
            write_dense(dir.join(&name), m)?;
            visual.push(name);
        }
        let keyed = |rows: &[Vec<String>]| -> Vec<(String, Vec<String>)> {
            self.ids.iter().cloned().zip(rows.iter().cloned()).collect()
        };
        write_keyed_lists(dir.join("tags.tsv"), &keyed(&self.tags))?;
        let keywords = match &self.keywords {
            Some(k) => {
                write_keyed_lists(dir.join("keywords.tsv"), &keyed(k))?;
                Some("keywords.tsv".to_string())
            }
            None => None,
        };
        let labels = match &self.labels {
            Some(l) => {
                write_assignments(dir.join("labels.tsv"), &self.ids, l)?;
                Some("labels.tsv".to_string())
            }
            None => None,
        };
        let splits = match &self.splits {
            Some(s) => {
                for (name, part) in s.named() {
                    let ids: Vec<String> = part.iter().map(|&i| self.ids[i].clone()).collect();
                    write_ids(dir.join(format!("split_{name}.txt")), &ids)?;
                }
                Some(SplitPaths {
                    train: "split_train.txt".into(),
                    database: "split_database.txt".into(),
                    validation: "split_validation.txt".into(),
                    test: "split_test.txt".into(),
                })
            }
            None => None,
        };
        let manifest = DatasetManifest {
            items: "items.txt".into(),
            visual,
            tags: "tags.tsv".into(),
            keywords,
            labels,
            splits,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }

    pub fn splits(&self) -> Result<&Splits> {
        self.splits
            .as_ref()
            .ok_or_else(|| Error::validation("dataset manifest defines no splits"))
    }

    /// Visual blocks restricted to `rows`.
    pub fn visual_rows(&self, rows: &[usize]) -> Vec<DMatrix<f64>> {
        self.visual.iter().map(|m| m.select_rows(rows)).collect()
    }

    pub fn tag_rows(&self, rows: &[usize]) -> Vec<Vec<String>> {
        rows.iter().map(|&i| self.tags[i].clone()).collect()
    }

    pub fn keywords(&self) -> Result<&[Vec<String>]> {
        self.keywords
            .as_deref()
            .ok_or_else(|| Error::validation("dataset has no keyword file"))
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::validation("dataset has no label file"))
    }

    pub fn row_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::validation(format!("unknown item {id:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            ids: (0..8).map(|i| format!("it{i}")).collect(),
            visual: vec![DMatrix::from_fn(8, 3, |i, j| (i * 3 + j) as f64), DMatrix::from_element(8, 2, 0.5)],
            tags: (0..8).map(|i| vec![format!("t{}", i % 3), "sky".to_string()]).collect(),
            keywords: Some((0..8).map(|i| vec![format!("k{}", i % 2)]).collect()),
            labels: Some((0..8).map(|i| i % 2).collect()),
            splits: Some(Splits::proportional(8, 1).unwrap()),
        }
    }

    #[test]
    fn round_trip_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny();
        let manifest = ds.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(&manifest).unwrap(), ds);
    }

    #[test]
    fn proportional_splits_partition() {
        let s = Splits::proportional(20000, 3).unwrap();
        assert_eq!(
            (s.train.len(), s.database.len(), s.validation.len(), s.test.len()),
            (12000, 6000, 1000, 1000)
        );
        s.check_disjoint(20000).unwrap();
        assert_eq!(s, Splits::proportional(20000, 3).unwrap());
    }

    #[test]
    fn overlapping_splits_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny().save(dir.path()).unwrap();
        let test = std::fs::read_to_string(dir.path().join("split_test.txt")).unwrap();
        std::fs::write(dir.path().join("split_validation.txt"), test).unwrap();
        assert!(matches!(Dataset::load(&manifest), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny().save(dir.path()).unwrap();
        std::fs::write(dir.path().join("tags.tsv"), "nope\tx\n").unwrap();
        assert!(matches!(Dataset::load(&manifest), Err(Error::Validation(_))));
    }
}
