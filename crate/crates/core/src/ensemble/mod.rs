//! Score-averaging ensembles of independently trained classifiers.

mod manifest;

pub use manifest::{EnsembleManifest, MemberEntry, ENSEMBLE_MANIFEST_FILE};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::imgproc::GrayImage;
use crate::nn::argmax;
use crate::trainer::TrainedModel;

/// Members whose probability vectors are averaged.
#[derive(Debug, Clone)]
pub struct EnsembleModel<M = TrainedModel<f32>> {
    members: Vec<M>,
    class_count: usize,
    /// Member indices sorted by name; the fixed summation order.
    order: Vec<usize>,
}

/// Checks that members agree on class count and input size.
pub fn build_ensemble<M: Classifier>(members: Vec<M>) -> Result<EnsembleModel<M>> {
    let first = members.first().ok_or_else(|| Error::Parameter("an ensemble needs at least one member".into()))?;
    let (class_count, size) = (first.num_classes(), first.input_size());
    for m in &members {
        if m.num_classes() != class_count {
            return Err(Error::Shape(format!(
                "member {} has {} classes but {} has {class_count}",
                m.name(),
                m.num_classes(),
                first.name()
            )));
        }
        if m.input_size() != size {
            return Err(Error::Shape(format!("member {} expects a different input size", m.name())));
        }
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| members[a].name().cmp(members[b].name()));
    Ok(EnsembleModel { members, class_count, order })
}

/// Elementwise mean of equal-length score vectors, summed in the given order.
pub fn mean_scores(rows: &[&[f64]]) -> Vec<f64> {
    let Some(first) = rows.first() else { return Vec::new() };
    let mut sum = vec![0.0; first.len()];
    for row in rows {
        for (s, &v) in sum.iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    let k = rows.len() as f64;
    sum.into_iter().map(|s| s / k).collect()
}

impl<M: Classifier> EnsembleModel<M> {
    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Averaged probabilities, one vector per image.
    pub fn scores(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
        let per_member: Vec<Vec<Vec<f64>>> = if self.members.len() == 1 {
            vec![self.members[0].predict_proba(images)?]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self.members.iter().map(|m| scope.spawn(move || m.predict_proba(images))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Parameter("member inference panicked".into()))))
                    .collect::<Result<Vec<_>>>()
            })?
        };
        Ok((0..images.len())
            .map(|i| {
                let rows: Vec<&[f64]> = self.order.iter().map(|&m| per_member[m][i].as_slice()).collect();
                mean_scores(&rows)
            })
            .collect())
    }
}

/// Mean of the members' probability vectors for one image.
pub fn ensemble_scores<M: Classifier>(e: &EnsembleModel<M>, image: &GrayImage) -> Result<Vec<f64>> {
    Ok(e.scores(std::slice::from_ref(image))?.remove(0))
}

/// Argmax of the averaged scores (ties to the lowest index) and its probability.
pub fn predict_label<M: Classifier>(e: &EnsembleModel<M>, image: &GrayImage) -> Result<(usize, f64)> {
    let p = ensemble_scores(e, image)?;
    let c = argmax(&p);
    Ok((c, p[c]))
}

impl<M: Classifier> Classifier for EnsembleModel<M> {
    fn name(&self) -> &str {
        "ensemble"
    }

    fn num_classes(&self) -> usize {
        self.class_count
    }

    fn input_size(&self) -> (usize, usize) {
        self.members[0].input_size()
    }

    /// Sum of the member totals.
    fn parameter_count(&self) -> u64 {
        self.members.iter().map(|m| m.parameter_count()).sum()
    }

    fn predict_proba(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
        self.scores(images)
    }
}
