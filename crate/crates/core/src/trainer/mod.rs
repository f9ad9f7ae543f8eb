//! Mini-batch Adam training with best-validation checkpointing.

mod adam;
mod config;
mod model;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;

pub use adam::{adam_update, AdamState};
pub use config::TrainConfig;
pub use model::{EpochRecord, TrainedModel, HISTORY_FILE, META_FILE, SPEC_FILE, WEIGHTS_FILE};

use crate::classifier::{check_sizes, push_image_tensor, Classifier};
use crate::dataset::rng::{derive_seed, seeded};
use crate::dataset::{augment, AugmentConfig, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::imgproc::GrayImage;
use crate::modelzoo::ModelSpec;
use crate::nn::{argmax, cross_entropy, Network};
use crate::Scalar;

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const AUGMENT_STREAM: u64 = 0x4155_474d;
const MEMBER_STREAM: u64 = 0x4d45_4d00;

/// In-memory training and validation images.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub train_images: Vec<GrayImage>,
    pub train_labels: Vec<usize>,
    pub val_images: Vec<GrayImage>,
    pub val_labels: Vec<usize>,
    pub num_classes: usize,
}

impl TrainingData {
    /// Loads the split's train and validation samples, resizing to `size` (`(w, h)`) if needed.
    pub fn from_split(manifest: &DatasetManifest, split: &Split, size: (usize, usize)) -> Result<Self> {
        split.validate(manifest.len())?;
        let (train_images, train_labels) = manifest.load_images(&split.train, Some(size))?;
        let (val_images, val_labels) = manifest.load_images(&split.val, Some(size))?;
        Ok(Self { train_images, train_labels, val_images, val_labels, num_classes: manifest.num_classes() })
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.train_images.is_empty() || self.val_images.is_empty() {
            return Err(Error::Dataset("training and validation sets must both be non-empty".into()));
        }
        if self.train_images.len() != self.train_labels.len() || self.val_images.len() != self.val_labels.len() {
            return Err(Error::Dataset("image and label counts differ".into()));
        }
        if spec.num_classes != self.num_classes {
            return Err(Error::Shape(format!(
                "model has {} classes but the dataset has {}",
                spec.num_classes, self.num_classes
            )));
        }
        if let Some(&bad) = self.train_labels.iter().chain(&self.val_labels).find(|&&y| y >= self.num_classes) {
            return Err(Error::Dataset(format!("label {bad} out of range")));
        }
        let (h, w, c) = spec.input_shape;
        if c != 1 {
            return Err(Error::Shape(format!("grayscale images need a 1-channel model, spec has {c}")));
        }
        check_sizes(&self.train_images, (w, h))?;
        check_sizes(&self.val_images, (w, h))
    }
}

/// Seed used for member `index` of a jointly trained set.
pub fn member_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, MEMBER_STREAM + index as u64)
}

/// Trains `spec` on the split's training samples, validating each epoch.
pub fn train<T: Scalar>(
    spec: &ModelSpec,
    manifest: &DatasetManifest,
    split: &Split,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
) -> Result<TrainedModel<T>> {
    let (h, w, _) = spec.input_shape;
    let data = TrainingData::from_split(manifest, split, (w, h))?;
    train_on(spec, &data, cfg, aug)
}

/// Trains on in-memory data; returns the weights of the best validation epoch.
pub fn train_on<T: Scalar>(spec: &ModelSpec, data: &TrainingData, cfg: &TrainConfig, aug: &AugmentConfig) -> Result<TrainedModel<T>> {
    cfg.validate()?;
    aug.validate()?;
    spec.validate()?;
    data.validate(spec)?;

    let mut net = Network::<T>::new(spec, cfg.seed)?;
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, SHUFFLE_STREAM));
    let mut aug_rng = seeded(derive_seed(cfg.seed ^ aug.seed, AUGMENT_STREAM));
    let mut states: Vec<AdamState<T>> = Vec::new();
    net.visit_params(&mut |p| states.push(AdamState::new(p.value.len())));

    let classes = data.num_classes;
    let n = data.train_images.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, crate::nn::Weights)> = None;
    let mut x: Vec<T> = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            x.clear();
            let labels: Vec<usize> = batch.iter().map(|&i| data.train_labels[i]).collect();
            for &i in batch {
                let img = &data.train_images[i];
                if aug.is_identity() {
                    push_image_tensor(img, &mut x);
                } else {
                    push_image_tensor(&augment(img, aug, &mut aug_rng), &mut x);
                }
            }
            net.zero_grad();
            let probs = net.forward_backward(&x, &labels)?;
            let loss = cross_entropy(&probs, &labels, classes);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, detail: format!("batch loss is {loss}") });
            }
            loss_sum += loss * batch.len() as f64;
            correct += probs.chunks(classes).zip(&labels).filter(|(p, &y)| argmax(p) == y).count();
            let mut k = 0;
            let mut result = Ok(());
            net.visit_params(&mut |p| {
                if result.is_ok() {
                    result = adam_update(&mut p.value, &p.grad, &mut states[k], cfg);
                }
                k += 1;
            });
            result?;
        }

        let (val_loss, val_acc) = validation_metrics(&net, &data.val_images, &data.val_labels)?;
        if val_loss.is_nan() {
            return Err(Error::Divergence { epoch, detail: format!("validation loss is {val_loss}") });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_acc: 100.0 * correct as f64 / n as f64,
            val_loss,
            val_acc,
        };
        log::info!(
            "{} epoch {epoch}/{}: loss {:.4} acc {:.2}% val_loss {:.4} val_acc {:.2}%",
            spec.name,
            cfg.epochs,
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        if best.as_ref().is_none_or(|(acc, _)| val_acc > *acc) {
            best = Some((val_acc, net.export_weights()));
        }
        history.push(record);
    }

    if let Some((_, weights)) = best {
        net.import_weights(&weights)?;
    }
    Ok(TrainedModel::new(net, history))
}

fn validation_metrics<T: Scalar>(net: &Network<T>, images: &[GrayImage], labels: &[usize]) -> Result<(f64, f64)> {
    let classes = net.num_classes();
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    let mut x = Vec::new();
    for (imgs, ys) in images.chunks(32).zip(labels.chunks(32)) {
        x.clear();
        for img in imgs {
            push_image_tensor(img, &mut x);
        }
        let probs = net.predict(&x, imgs.len())?;
        loss_sum += cross_entropy(&probs, ys, classes) * ys.len() as f64;
        correct += probs.chunks(classes).zip(ys).filter(|(p, &y)| argmax(p) == y).count();
    }
    Ok((loss_sum / labels.len() as f64, 100.0 * correct as f64 / labels.len() as f64))
}

/// How [`train_members`] schedules its members. `Concurrent` runs one worker per available core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Concurrent,
}

/// Trains each spec independently with a member-indexed seed.
///
/// One member's failure does not affect the others; results are in `specs` order.
pub fn train_members<T: Scalar>(
    specs: &[ModelSpec],
    data: &TrainingData,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    execution: Execution,
) -> Result<Vec<Result<TrainedModel<T>>>> {
    if specs.is_empty() {
        return Err(Error::Parameter("at least one member spec is required".into()));
    }
    let member_cfg = |i: usize| TrainConfig { seed: member_seed(cfg.seed, i), ..cfg.clone() };
    Ok(match execution {
        Execution::Serial => specs.iter().enumerate().map(|(i, s)| train_on(s, data, &member_cfg(i), aug)).collect(),
        Execution::Concurrent => {
            // one worker per available core; extra members queue rather than contend for a core
            let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(specs.len());
            let next = AtomicUsize::new(0);
            let slots: Vec<Mutex<Option<Result<TrainedModel<T>>>>> = specs.iter().map(|_| Mutex::new(None)).collect();
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(spec) = specs.get(i) else { break };
                        let result = catch_unwind(AssertUnwindSafe(|| train_on(spec, data, &member_cfg(i), aug)))
                            .unwrap_or_else(|_| Err(Error::Parameter(format!("member {} panicked", spec.name))));
                        *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
                    });
                }
            });
            slots
                .into_iter()
                .map(|s| s.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every member is scheduled"))
                .collect()
        }
    })
}

/// Accuracy in percent and per-sample predictions over manifest samples.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, manifest: &DatasetManifest, indices: &[usize]) -> Result<(f64, Vec<usize>)> {
    if indices.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty index list".into()));
    }
    let (images, labels) = manifest.load_images(indices, Some(model.input_size()))?;
    evaluate_images(model, &images, &labels)
}

/// Accuracy in percent and per-sample predictions over in-memory images.
pub fn evaluate_images<C: Classifier + ?Sized>(model: &C, images: &[GrayImage], labels: &[usize]) -> Result<(f64, Vec<usize>)> {
    if images.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty image list".into()));
    }
    if images.len() != labels.len() {
        return Err(Error::Dataset("image and label counts differ".into()));
    }
    let predictions: Vec<usize> = model.predict_labels(images)?.into_iter().map(|(c, _)| c).collect();
    Ok((accuracy(&predictions, labels), predictions))
}

/// Percentage of positions where `predictions` equals `labels`.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    100.0 * correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FixedScores;
    use crate::dataset::synthetic::synthetic_shapes;
    use crate::modelzoo::LayerSpec;

    fn tiny_spec(name: &str, filters: usize) -> ModelSpec {
        ModelSpec {
            name: name.into(),
            input_shape: (16, 16, 1),
            layers: vec![
                LayerSpec::conv(filters, 3),
                LayerSpec::BatchNorm,
                LayerSpec::ReLU,
                LayerSpec::pool2(),
                LayerSpec::Flatten,
                LayerSpec::dropout(0.2),
                LayerSpec::dense(3),
                LayerSpec::Softmax,
            ],
            num_classes: 3,
        }
    }

    fn data() -> TrainingData {
        let (images, labels) = synthetic_shapes(20, 16, 4);
        let mut d = TrainingData { train_images: vec![], train_labels: vec![], val_images: vec![], val_labels: vec![], num_classes: 3 };
        for (i, (img, y)) in images.into_iter().zip(labels).enumerate() {
            if i % 4 == 0 {
                d.val_images.push(img);
                d.val_labels.push(y);
            } else {
                d.train_images.push(img);
                d.train_labels.push(y);
            }
        }
        d
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 8, learning_rate: 3e-3, seed: 17, ..TrainConfig::default() }
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let err = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(0), &AugmentConfig::identity()).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn same_seed_same_history() {
        let aug = AugmentConfig::default();
        let a = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(3), &aug).unwrap();
        let b = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(3), &aug).unwrap();
        assert_eq!(a.history(), b.history());
        assert_eq!(
            format!("{:.6}", a.history().last().unwrap().train_loss),
            format!("{:.6}", b.history().last().unwrap().train_loss)
        );
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn best_epoch_is_the_history_maximum() {
        let m = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(4), &AugmentConfig::identity()).unwrap();
        assert!(m.history().len() <= 4);
        let max = m.history().iter().map(|r| r.val_acc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(m.best_val_accuracy(), max);
        let (acc, _) = evaluate_images(&m, &data().val_images, &data().val_labels).unwrap();
        assert_eq!(acc, max, "retained weights reproduce the best epoch");
    }

    #[test]
    fn members_are_independent_of_scheduling() {
        let specs = [tiny_spec("a", 4), tiny_spec("b", 6), tiny_spec("c", 4)];
        let aug = AugmentConfig::identity();
        let serial = train_members::<f32>(&specs, &data(), &cfg(2), &aug, Execution::Serial).unwrap();
        let concurrent = train_members::<f32>(&specs, &data(), &cfg(2), &aug, Execution::Concurrent).unwrap();
        for (s, c) in serial.iter().zip(&concurrent) {
            let (s, c) = (s.as_ref().unwrap(), c.as_ref().unwrap());
            assert_eq!(s.history(), c.history());
            assert_eq!(s.weights(), c.weights());
        }
        // members a and c share an architecture but not a seed
        assert_ne!(serial[0].as_ref().unwrap().weights().layers, serial[2].as_ref().unwrap().weights().layers);
        let alone = train_on::<f32>(&specs[1], &data(), &TrainConfig { seed: member_seed(17, 1), ..cfg(2) }, &aug).unwrap();
        assert_eq!(alone.weights(), serial[1].as_ref().unwrap().weights());
    }

    #[test]
    fn one_failing_member_does_not_stop_the_others() {
        let mut wrong = tiny_spec("wrong", 4);
        wrong.input_shape = (8, 8, 1);
        let specs = [tiny_spec("ok", 4), wrong];
        let out = train_members::<f32>(&specs, &data(), &cfg(1), &AugmentConfig::identity(), Execution::Concurrent).unwrap();
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::Shape(_))));
        assert!(train_members::<f32>(&[], &data(), &cfg(1), &AugmentConfig::identity(), Execution::Serial).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let huge = TrainConfig { learning_rate: 1e30, ..cfg(5) };
        match train_on::<f32>(&tiny_spec("t", 4), &data(), &huge, &AugmentConfig::identity()) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            Err(e) => panic!("unexpected error {e}"),
            Ok(m) => assert!(m.history().iter().all(|r| r.train_loss.is_finite())),
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let m = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(2), &AugmentConfig::identity()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let header = std::fs::read_to_string(dir.path().join(HISTORY_FILE)).unwrap();
        assert!(header.starts_with("epoch,train_loss,train_acc,val_loss,val_acc"));
        let back = TrainedModel::<f32>::load(dir.path()).unwrap();
        assert_eq!(back.history(), m.history());
        assert_eq!(back.best_val_accuracy(), m.best_val_accuracy());
        let imgs = &data().val_images;
        assert_eq!(back.predict_proba(imgs).unwrap(), m.predict_proba(imgs).unwrap());
        assert!(matches!(TrainedModel::<f32>::load(&dir.path().join("nope")), Err(Error::MissingArtifact(_))));
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[0, 1, 2, 1], &[0, 1, 2, 0]), 75.0);
        assert_eq!(accuracy(&[2, 2], &[2, 2]), 100.0);
        let img = GrayImage::filled(4, 4, 0).unwrap();
        let stub = FixedScores::new("s", vec![0.2, 0.5, 0.3], (4, 4));
        let (acc, preds) = evaluate_images(&stub, &vec![img; 4], &[1, 1, 1, 0]).unwrap();
        assert_eq!((acc, preds), (75.0, vec![1; 4]));
        assert!(evaluate_images(&stub, &[], &[]).is_err());
    }

    #[test]
    fn evaluation_matches_manual_recount() {
        let m = train_on::<f32>(&tiny_spec("t", 4), &data(), &cfg(1), &AugmentConfig::identity()).unwrap();
        let d = data();
        let (acc, preds) = evaluate_images(&m, &d.val_images, &d.val_labels).unwrap();
        let probs = m.predict_proba(&d.val_images).unwrap();
        let mut correct = 0;
        for ((p, &y), &pred) in probs.iter().zip(&d.val_labels).zip(&preds) {
            let mut best = 0;
            for c in 1..p.len() {
                if p[c] > p[best] {
                    best = c;
                }
            }
            assert_eq!(best, pred);
            correct += usize::from(best == y);
        }
        assert_eq!(acc, 100.0 * correct as f64 / d.val_labels.len() as f64);
    }
}
