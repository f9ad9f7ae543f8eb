use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use super::rng::seeded;
use crate::error::{Error, Result};

/// Disjoint train/validation/test index lists over a manifest's samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MIN_PER_CLASS: usize = 5;

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified 60/20/20 split: each class is shuffled, its first 80% becomes train+validation
/// (75/25 of that) and the remaining 20% becomes test.
pub fn split(manifest: &DatasetManifest, seed: u64) -> Result<Split> {
    let mut rng = seeded(seed);
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    let mut offset = 0;
    for (class, &n) in manifest.classes.iter().zip(&manifest.counts) {
        if n < MIN_PER_CLASS {
            return Err(Error::Dataset(format!(
                "class {class:?} has {n} samples; at least {MIN_PER_CLASS} are needed to stratify"
            )));
        }
        let mut idx: Vec<usize> = (offset..offset + n).collect();
        idx.shuffle(&mut rng);
        let n_fit = round_half_up(0.8 * n as f64);
        let n_train = round_half_up(0.75 * n_fit as f64);
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..n_fit]);
        test.extend_from_slice(&idx[n_fit..]);
        offset += n;
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { seed, train, val, test })
}

impl Split {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that the lists partition `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::Dataset(format!("split index {i} is out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Dataset("split does not cover every sample".into()));
        }
        Ok(())
    }
}
