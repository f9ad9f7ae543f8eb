//! Accuracy, confusion matrices, k-part accuracy sampling and the one-sample t-test.

mod confusion;
pub mod stats;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use confusion::{confusion, per_class_rate, ConfusionMatrix};
pub use stats::{student_t_cdf, two_sided_p};

use crate::classifier::Classifier;
use crate::dataset::rng::seeded;
use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::trainer::accuracy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    /// Standard error of the mean.
    pub sem: f64,
    pub mu: f64,
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    /// Tail probability in the direction of the observed difference.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

impl TTestReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// One-sample t-test from summary statistics.
pub fn ttest_from_summary(n: usize, mean: f64, sd: f64, mu: f64) -> Result<TTestReport> {
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
    }
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sample standard deviation is zero".into()));
    }
    let sem = sd / (n as f64).sqrt();
    let t = (mean - mu) / sem;
    let df = n - 1;
    let p_two_sided = two_sided_p(t, df as f64);
    Ok(TTestReport { n, mean, sd, sem, mu, mean_difference: mean - mu, t, df, p_one_sided: p_two_sided / 2.0, p_two_sided })
}

/// Tests whether the mean of `samples` differs from `mu`.
pub fn one_sample_ttest(samples: &[f64], mu: f64) -> Result<TTestReport> {
    let (mean, sd) = stats::mean_sd(samples)?;
    ttest_from_summary(samples.len(), mean, sd, mu)
}

/// Seeded shuffle of `0..n` cut into `k` disjoint parts whose sizes differ by at most one.
pub fn kfold_parts(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("k = {k} exceeds the {n} available samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        parts.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(parts)
}

/// Accuracy of each of `k` disjoint parts of already-computed predictions.
pub fn kfold_accuracy_from_predictions(preds: &[usize], labels: &[usize], k: usize, seed: u64) -> Result<Vec<f64>> {
    if preds.len() != labels.len() {
        return Err(Error::Shape("predictions and labels differ in length".into()));
    }
    Ok(kfold_parts(labels.len(), k, seed)?
        .iter()
        .map(|part| {
            let p: Vec<usize> = part.iter().map(|&i| preds[i]).collect();
            let y: Vec<usize> = part.iter().map(|&i| labels[i]).collect();
            accuracy(&p, &y)
        })
        .collect())
}

/// Per-part test accuracies of a classifier over `k` disjoint parts of `test`.
pub fn kfold_accuracy_samples<C: Classifier + ?Sized>(
    model: &C,
    manifest: &DatasetManifest,
    test: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if k > test.len() {
        return Err(Error::Parameter(format!("k = {k} exceeds the {} test samples", test.len())));
    }
    let (images, labels) = manifest.load_images(test, Some(model.input_size()))?;
    let preds: Vec<usize> = model.predict_labels(&images)?.into_iter().map(|(c, _)| c).collect();
    kfold_accuracy_from_predictions(&preds, &labels, k, seed)
}
