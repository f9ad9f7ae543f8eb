use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gestnet_core::dataset::AugmentConfig;
use gestnet_core::imgproc::{PreprocessConfig, Threshold};
use gestnet_core::modelzoo::{self, MEMBER_NAMES};
use gestnet_core::realtime::LiveConfig;
use gestnet_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

pub const EFFECTIVE_CONFIG_FILE: &str = "config.json";

/// `(width, height)` the reference architectures are built for.
const REFERENCE_INPUT: (usize, usize) = (modelzoo::INPUT_SHAPE.1, modelzoo::INPUT_SHAPE.0);

/// Every tunable of an experiment; defaults follow the reference hyper-parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Network input `(width, height)`.
    pub input_size: (usize, usize),
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Pooling window of the reference architectures.
    pub pool_size: usize,
    pub dropout: f64,
    pub members: Vec<String>,
    pub augment: AugmentConfig,
    pub threshold: Threshold,
    pub expand_ratio: f64,
    pub median_window: usize,
    pub k: usize,
    pub mu: f64,
    pub background_learning_rate: f64,
    pub background_threshold: f64,
    pub resume_after: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let pre = PreprocessConfig::default();
        let live = LiveConfig::default();
        Self {
            data: None,
            out: None,
            seed: train.seed,
            input_size: REFERENCE_INPUT,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            beta1: train.beta1,
            beta2: train.beta2,
            epsilon: train.epsilon,
            pool_size: 2,
            dropout: modelzoo::DROPOUT,
            members: MEMBER_NAMES.iter().map(|s| s.to_string()).collect(),
            augment: AugmentConfig::default(),
            threshold: pre.threshold,
            expand_ratio: pre.expand_ratio,
            median_window: pre.median_window,
            k: 10,
            mu: 99.0,
            background_learning_rate: live.background_learning_rate,
            background_threshold: live.background_threshold,
            resume_after: live.resume_after,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub members: Option<Vec<String>>,
    pub expand_ratio: Option<f64>,
    pub threshold: Option<Threshold>,
    pub k: Option<usize>,
    pub mu: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Config file (if any) overlaid with flags; flags win.
    pub fn resolve(file: Option<&Path>, o: Overrides) -> Result<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$( if let Some(v) = o.$field { c.$field = v.into(); } )*};
        }
        take!(seed, epochs, batch_size, learning_rate, members, expand_ratio, threshold, k, mu);
        if o.data.is_some() {
            c.data = o.data;
        }
        if o.out.is_some() {
            c.out = o.out;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size != REFERENCE_INPUT {
            bail!(
                "the reference architectures take {}x{} inputs, config asks for {}x{}",
                REFERENCE_INPUT.0,
                REFERENCE_INPUT.1,
                self.input_size.0,
                self.input_size.1
            );
        }
        if self.pool_size != 2 {
            bail!("the reference architectures use 2x2 pooling, config asks for {}", self.pool_size);
        }
        if self.dropout != modelzoo::DROPOUT {
            bail!("the reference architectures use dropout {}, config asks for {}", modelzoo::DROPOUT, self.dropout);
        }
        if self.members.is_empty() {
            bail!("at least one member is required");
        }
        for m in &self.members {
            modelzoo::by_name(m, 2)?;
        }
        self.train().validate()?;
        self.preprocess().validate()?;
        self.augment.validate()?;
        Ok(())
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            threshold: self.threshold,
            expand_ratio: self.expand_ratio,
            median_window: self.median_window,
            target_width: self.input_size.0,
            target_height: self.input_size.1,
            ..PreprocessConfig::default()
        }
    }

    pub fn live(&self) -> LiveConfig {
        LiveConfig {
            preprocess: self.preprocess(),
            background_learning_rate: self.background_learning_rate,
            background_threshold: self.background_threshold,
            resume_after: self.resume_after,
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("an output directory is required (--out)")
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().context("a dataset path is required (--data)")
    }

    /// Writes the effective configuration into the output directory.
    pub fn echo(&self) -> Result<()> {
        let out = self.out_dir()?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(EFFECTIVE_CONFIG_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_reference_settings() {
        let c = RunConfig::default();
        assert_eq!(c.input_size, (64, 64));
        assert_eq!((c.epochs, c.batch_size, c.learning_rate), (30, 160, 0.0001));
        assert_eq!((c.pool_size, c.dropout), (2, 0.2));
        assert_eq!(c.members, vec!["vggnet_like", "alexnet_like", "googlenet_like"]);
        c.validate().unwrap();
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epochs": 5, "batch_size": 8, "seed": 3}"#).unwrap();
        let c = RunConfig::resolve(Some(&path), Overrides { epochs: Some(7), ..Overrides::default() }).unwrap();
        assert_eq!((c.epochs, c.batch_size, c.seed), (7, 8, 3));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epoch": 5}"#).unwrap();
        assert!(RunConfig::resolve(Some(&path), Overrides::default()).is_err());
        assert!(RunConfig::resolve(None, Overrides { epochs: Some(0), ..Overrides::default() }).is_err());
        assert!(RunConfig::resolve(None, Overrides { members: Some(vec!["nope".into()]), ..Overrides::default() }).is_err());
    }
}
