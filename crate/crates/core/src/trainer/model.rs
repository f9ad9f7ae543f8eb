use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{check_sizes, push_image_tensor, Classifier};
use crate::error::{Error, Result};
use crate::imgproc::GrayImage;
use crate::modelzoo::ModelSpec;
use crate::nn::{Network, Weights};
use crate::Scalar;

pub const SPEC_FILE: &str = "spec.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const META_FILE: &str = "model.json";

const INFERENCE_BATCH: usize = 32;

/// Metrics of one training epoch; accuracies are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    name: String,
    spec_hash: String,
    parameters: u64,
    best_val_accuracy: f64,
    best_epoch: usize,
}

/// A network together with its training history.
#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    name: String,
    network: Network<T>,
    history: Vec<EpochRecord>,
    best_val_accuracy: f64,
    best_epoch: usize,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn new(network: Network<T>, history: Vec<EpochRecord>) -> Self {
        let (best_epoch, best_val_accuracy) = history
            .iter()
            .fold((0, f64::NEG_INFINITY), |best, r| if r.val_acc > best.1 { (r.epoch, r.val_acc) } else { best });
        Self {
            name: network.spec().name.clone(),
            network,
            history,
            best_val_accuracy: if best_epoch == 0 { f64::NAN } else { best_val_accuracy },
            best_epoch,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn spec(&self) -> &ModelSpec {
        self.network.spec()
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// Highest validation accuracy in the history (NaN for an untrained model).
    pub fn best_val_accuracy(&self) -> f64 {
        self.best_val_accuracy
    }

    /// 1-based epoch whose weights the model holds (0 if untrained).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn weights(&self) -> Weights {
        self.network.export_weights()
    }

    /// Writes `spec.json`, `weights.bin`, `history.csv` and `model.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let spec_path = dir.join(SPEC_FILE);
        fs::write(&spec_path, self.spec().to_json()?).map_err(|e| Error::io(&spec_path, e))?;
        self.weights().save(&dir.join(WEIGHTS_FILE))?;
        let mut w = csv::Writer::from_path(dir.join(HISTORY_FILE))?;
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(dir.join(HISTORY_FILE), e))?;
        let meta = ModelMeta {
            name: self.name.clone(),
            spec_hash: self.network.spec_hash().to_string(),
            parameters: self.parameter_count(),
            best_val_accuracy: self.best_val_accuracy,
            best_epoch: self.best_epoch,
        };
        let meta_path = dir.join(META_FILE);
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec_path = dir.join(SPEC_FILE);
        if !spec_path.exists() {
            return Err(Error::MissingArtifact(spec_path));
        }
        let spec = ModelSpec::from_json(&fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?)?;
        let weights = Weights::load(&dir.join(WEIGHTS_FILE))?;
        let mut network = Network::new(&spec, 0)?;
        network.import_weights(&weights)?;
        let history_path = dir.join(HISTORY_FILE);
        let history = if history_path.exists() {
            csv::Reader::from_path(&history_path)?.deserialize().collect::<Result<Vec<EpochRecord>, _>>()?
        } else {
            Vec::new()
        };
        let mut model = Self::new(network, history);
        let meta_path = dir.join(META_FILE);
        if meta_path.exists() {
            let meta: ModelMeta =
                serde_json::from_str(&fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?)?;
            model.name = meta.name;
            if meta.best_epoch != 0 {
                model.best_epoch = meta.best_epoch;
                model.best_val_accuracy = meta.best_val_accuracy;
            }
        }
        Ok(model)
    }
}

impl<T: Scalar> Classifier for TrainedModel<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_classes(&self) -> usize {
        self.network.num_classes()
    }

    fn input_size(&self) -> (usize, usize) {
        let (h, w, _) = self.spec().input_shape;
        (w, h)
    }

    fn parameter_count(&self) -> u64 {
        self.network.parameter_count()
    }

    fn predict_proba(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
        check_sizes(images, self.input_size())?;
        let classes = self.num_classes();
        let mut out = Vec::with_capacity(images.len());
        let mut x = Vec::new();
        for chunk in images.chunks(INFERENCE_BATCH) {
            x.clear();
            for img in chunk {
                push_image_tensor(img, &mut x);
            }
            let probs = self.network.predict(&x, chunk.len())?;
            out.extend(probs.chunks(classes).map(|row| row.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>()));
        }
        Ok(out)
    }
}
