use gestnet_core::dataset::synthetic::write_synthetic_dataset;
use gestnet_core::dataset::{split, AugmentConfig};
use gestnet_core::ensemble::{build_ensemble, EnsembleManifest, ENSEMBLE_MANIFEST_FILE};
use gestnet_core::modelzoo;
use gestnet_core::trainer::{train_members, Execution, TrainConfig, TrainingData, WEIGHTS_FILE};
use gestnet_core::{Classifier, Error};

#[test]
fn trained_ensemble_survives_a_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_dataset(&dir.path().join("data"), 8, 64, 4).unwrap();
    let s = split(&manifest, 4).unwrap();
    let data = TrainingData::from_split(&manifest, &s, (64, 64)).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 4, learning_rate: 1e-3, seed: 4, ..TrainConfig::default() };
    let specs = [modelzoo::basic_cnn(3).unwrap(), modelzoo::basic_cnn(3).unwrap()];
    let members: Vec<_> = train_members::<f32>(&specs, &data, &cfg, &AugmentConfig::identity(), Execution::Concurrent)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.unwrap().with_name(format!("basic_{i}")))
        .collect();

    let run = dir.path().join("run");
    let mut entries = Vec::new();
    for m in &members {
        let d = run.join(m.name());
        m.save(&d).unwrap();
        entries.push((m.name().to_string(), d));
    }
    let path = run.join(ENSEMBLE_MANIFEST_FILE);
    EnsembleManifest::describe(&run, &manifest.classes, &entries).unwrap().save(&path).unwrap();

    let original = build_ensemble(members).unwrap();
    let loaded = EnsembleManifest::load_ensemble::<f32>(&path).unwrap();
    let (images, _) = manifest.load_images(&s.test, Some((64, 64))).unwrap();
    assert_eq!(original.predict_proba(&images).unwrap(), loaded.predict_proba(&images).unwrap());
    assert_eq!(original.parameter_count(), loaded.parameter_count());

    let weights = run.join("basic_0").join(WEIGHTS_FILE);
    let mut bytes = std::fs::read(&weights).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(&weights, bytes).unwrap();
    assert!(matches!(EnsembleManifest::load_ensemble::<f32>(&path), Err(Error::Corrupt(_))));

    std::fs::remove_file(&weights).unwrap();
    assert!(matches!(EnsembleManifest::load_ensemble::<f32>(&path), Err(Error::MissingArtifact(_))));
}
