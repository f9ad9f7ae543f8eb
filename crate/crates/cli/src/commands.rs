use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gestnet_core::dataset::{split, DatasetManifest, Split};
use gestnet_core::ensemble::{EnsembleManifest, ENSEMBLE_MANIFEST_FILE};
use gestnet_core::eval::{confusion, kfold_accuracy_samples, one_sample_ttest, per_class_rate};
use gestnet_core::imgproc::io::{load_gray, save_gray, save_rgb};
use gestnet_core::imgproc::preprocess_gray;
use gestnet_core::modelzoo;
use gestnet_core::realtime::{annotate, run_live, write_session_csv, SourceSpec};
use gestnet_core::trainer::{train_members, Execution, TrainingData, SPEC_FILE};
use gestnet_core::{Classifier, EnsembleModel, TrainedModel};
use serde::Serialize;

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLIT_FILE: &str = "split.json";
pub const SKIPPED_FILE: &str = "skipped.json";
pub const EVAL_FILE: &str = "eval.json";
pub const TTEST_FILE: &str = "ttest.json";
pub const KFOLD_FILE: &str = "kfold_accuracies.json";
pub const SESSION_FILE: &str = "session.csv";
pub const LATENCY_FILE: &str = "latency.json";
pub const FRAMES_DIR: &str = "frames";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// A manifest file, or a dataset root directory to ingest.
fn load_dataset(path: &Path) -> Result<DatasetManifest> {
    if path.is_dir() {
        let root = path.canonicalize().with_context(|| format!("resolving {}", path.display()))?;
        Ok(DatasetManifest::ingest(&root)?)
    } else if path.is_file() {
        Ok(DatasetManifest::load(path)?)
    } else {
        bail!("dataset path {} does not exist", path.display())
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let root = cfg.data_path()?;
    if !root.is_dir() {
        bail!("dataset root {} is not a directory", root.display());
    }
    let manifest = load_dataset(root)?;
    cfg.echo()?;
    let path = cfg.out_dir()?.join(MANIFEST_FILE);
    manifest.save(&path)?;
    println!("{} classes, {} images -> {}", manifest.num_classes(), manifest.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct Skipped {
    file: PathBuf,
    reason: String,
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let manifest = load_dataset(cfg.data_path()?)?;
    cfg.echo()?;
    let out = cfg.out_dir()?;
    let out_root = out.canonicalize()?;
    let pre = cfg.preprocess();
    let mut kept: Vec<(String, Vec<String>)> = manifest.classes.iter().map(|c| (c.clone(), Vec::new())).collect();
    let mut skipped = Vec::new();
    for sample in manifest.samples() {
        let class = &manifest.classes[sample.label];
        let result = load_gray(&sample.path).and_then(|img| preprocess_gray(&img, &pre));
        match result {
            Ok(region) => {
                let stem = sample.path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                let name = format!("{stem}.png");
                save_gray(&region.input, &out_root.join(class).join(&name))?;
                kept[sample.label].1.push(name);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", sample.path.display());
                skipped.push(Skipped { file: sample.path.clone(), reason: e.to_string() });
            }
        }
    }
    for (_, files) in &mut kept {
        files.sort();
    }
    let mut processed = DatasetManifest::from_parts(&out_root, kept)?;
    processed.image_size = Some(cfg.input_size);
    processed.save(&out.join(MANIFEST_FILE))?;
    write_json(&out.join(SKIPPED_FILE), &skipped)?;
    println!("processed {} images, skipped {}", processed.len(), skipped.len());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let manifest = load_dataset(cfg.data_path()?)?;
    cfg.echo()?;
    let out = cfg.out_dir()?.canonicalize()?;
    manifest.save(&out.join(MANIFEST_FILE))?;
    let split = split(&manifest, cfg.seed)?;
    split.save(&out.join(SPLIT_FILE))?;
    let specs = cfg
        .members
        .iter()
        .map(|m| modelzoo::by_name(m, manifest.num_classes()))
        .collect::<gestnet_core::Result<Vec<_>>>()?;
    let data = TrainingData::from_split(&manifest, &split, cfg.input_size)?;
    log::info!("training {} members on {} images ({} validation)", specs.len(), data.train_images.len(), data.val_images.len());
    let results = train_members::<f32>(&specs, &data, &cfg.train(), &cfg.augment, Execution::Concurrent)?;

    let mut saved = Vec::new();
    let mut first_error = None;
    for (spec, result) in specs.iter().zip(results) {
        match result {
            Ok(model) => {
                let dir = out.join(&spec.name);
                model.save(&dir)?;
                println!(
                    "{}: best validation accuracy {:.2}% at epoch {}",
                    spec.name,
                    model.best_val_accuracy(),
                    model.best_epoch()
                );
                saved.push((spec.name.clone(), dir));
            }
            Err(e) => {
                eprintln!("{}: training failed: {e}", spec.name);
                first_error.get_or_insert(e);
            }
        }
    }
    if !saved.is_empty() {
        EnsembleManifest::describe(&out, &manifest.classes, &saved)?.save(&out.join(ENSEMBLE_MANIFEST_FILE))?;
    }
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// A loaded model plus the directory holding its companion artifacts.
struct Loaded {
    ensemble: Option<EnsembleModel>,
    single: Option<TrainedModel>,
    classes: Vec<String>,
    home: PathBuf,
}

impl Loaded {
    fn open(path: &Path) -> Result<Self> {
        let ensemble_file = if path.is_dir() { path.join(ENSEMBLE_MANIFEST_FILE) } else { path.to_path_buf() };
        if path.is_dir() && path.join(SPEC_FILE).exists() {
            let model = TrainedModel::load(path)?;
            let home = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let classes = EnsembleManifest::load(&home.join(ENSEMBLE_MANIFEST_FILE)).map(|m| m.classes).unwrap_or_default();
            return Ok(Self { ensemble: None, single: Some(model), classes, home });
        }
        let manifest = EnsembleManifest::load(&ensemble_file)?;
        let ensemble = EnsembleManifest::load_ensemble::<f32>(&ensemble_file)?;
        let home = ensemble_file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { ensemble: Some(ensemble), single: None, classes: manifest.classes, home })
    }

    fn classifier(&self) -> &dyn Classifier {
        match (&self.ensemble, &self.single) {
            (Some(e), _) => e,
            (None, Some(m)) => m,
            (None, None) => unreachable!("one of the two is always set"),
        }
    }

    /// Every member followed by the ensemble itself.
    fn all(&self) -> Vec<&dyn Classifier> {
        match &self.ensemble {
            Some(e) => e.members().iter().map(|m| m as &dyn Classifier).chain([e as &dyn Classifier]).collect(),
            None => vec![self.classifier()],
        }
    }

    fn class_names(&self) -> Vec<String> {
        if self.classes.len() == self.classifier().num_classes() {
            self.classes.clone()
        } else {
            (0..self.classifier().num_classes()).map(|i| format!("class{i}")).collect()
        }
    }
}

/// The dataset and test indices to evaluate on.
fn test_set(cfg: &RunConfig, loaded: &Loaded, split_path: Option<&Path>) -> Result<(DatasetManifest, Vec<usize>)> {
    let manifest = match &cfg.data {
        Some(p) => load_dataset(p)?,
        None => load_dataset(&loaded.home.join(MANIFEST_FILE))?,
    };
    let split_path = split_path.map(Path::to_path_buf).unwrap_or_else(|| loaded.home.join(SPLIT_FILE));
    let indices = if split_path.exists() {
        let s = Split::load(&split_path)?;
        s.validate(manifest.len())?;
        s.test
    } else {
        log::info!("no split found at {}; evaluating every sample", split_path.display());
        (0..manifest.len()).collect()
    };
    if indices.is_empty() {
        bail!("the test set is empty");
    }
    Ok((manifest, indices))
}

#[derive(Serialize)]
struct EvalEntry {
    accuracy: f64,
    per_class_rate: BTreeMap<String, f64>,
}

pub fn eval(cfg: &RunConfig, model: &Path, split_path: Option<&Path>) -> Result<()> {
    let loaded = Loaded::open(model)?;
    let (manifest, test) = test_set(cfg, &loaded, split_path)?;
    cfg.echo()?;
    let out = cfg.out_dir()?;
    let classes = manifest.classes.clone();
    let (images, labels) = manifest.load_images(&test, Some(loaded.classifier().input_size()))?;
    let mut report = BTreeMap::new();
    for c in loaded.all() {
        let preds: Vec<usize> = c.predict_labels(&images)?.into_iter().map(|(p, _)| p).collect();
        let cm = confusion(&preds, &labels, &classes)?;
        cm.save_csv(&out.join(format!("confusion_{}.csv", c.name())))?;
        let rates = per_class_rate(&cm);
        println!("{}: accuracy {:.2}% on {} test images", c.name(), cm.accuracy(), labels.len());
        report.insert(
            c.name().to_string(),
            EvalEntry { accuracy: cm.accuracy(), per_class_rate: classes.iter().cloned().zip(rates).collect() },
        );
    }
    write_json(&out.join(EVAL_FILE), &report)
}

pub fn ttest(cfg: &RunConfig, model: &Path, split_path: Option<&Path>) -> Result<()> {
    let loaded = Loaded::open(model)?;
    let (manifest, test) = test_set(cfg, &loaded, split_path)?;
    cfg.echo()?;
    let out = cfg.out_dir()?;
    let accuracies = kfold_accuracy_samples(loaded.classifier(), &manifest, &test, cfg.k, cfg.seed)?;
    write_json(&out.join(KFOLD_FILE), &accuracies)?;
    let report = one_sample_ttest(&accuracies, cfg.mu)?;
    report.save(&out.join(TTEST_FILE))?;
    println!(
        "n {} mean {:.4} sd {:.4} t {:.3} df {} p(two-sided) {:.3e}",
        report.n, report.mean, report.sd, report.t, report.df, report.p_two_sided
    );
    Ok(())
}

pub fn live(cfg: &RunConfig, model: &Path, source: &str, display: bool) -> Result<()> {
    let loaded = Loaded::open(model)?;
    let spec: SourceSpec = source.parse().expect("infallible");
    let mut frames = spec.open()?;
    cfg.echo()?;
    let out = cfg.out_dir()?.to_path_buf();
    let frames_dir = out.join(FRAMES_DIR);
    if display {
        std::fs::create_dir_all(&frames_dir)?;
    }
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, std::sync::atomic::Ordering::SeqCst)) {
            log::warn!("could not install the interrupt handler: {e}");
        }
    }
    let session = run_live(frames.as_mut(), loaded.classifier(), loaded.class_names(), cfg.live(), &stop, |processed, frame| {
        let r = &processed.result;
        log::info!("frame {}: {} ({:.3}) {:.2} ms", r.frame_index, r.label, r.confidence, r.latency_ms);
        if display {
            let path = frames_dir.join(format!("frame_{:05}_{}.png", r.frame_index, r.label));
            save_rgb(&annotate(frame, processed.bbox.as_ref()), &path)?;
        }
        Ok(())
    })?;
    write_session_csv(&session.results, &out.join(SESSION_FILE))?;
    match &session.report {
        Some(report) => {
            report.save(&out.join(LATENCY_FILE))?;
            println!(
                "{} frames, average latency {:.3} ms, {:.1} fps",
                report.frames, report.overall_avg_ms, report.fps
            );
        }
        None => println!("no frames processed"),
    }
    Ok(())
}
