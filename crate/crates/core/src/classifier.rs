//! The common interface of anything that maps preprocessed images to class probabilities.

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;
use crate::nn::argmax;
use crate::Scalar;

pub trait Classifier: Sync {
    fn name(&self) -> &str;

    fn num_classes(&self) -> usize;

    /// Expected `(width, height)` of input images.
    fn input_size(&self) -> (usize, usize);

    fn parameter_count(&self) -> u64;

    /// One probability vector per image.
    fn predict_proba(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>>;

    /// Most probable class (ties to the lowest index) and its probability, per image.
    fn predict_labels(&self, images: &[GrayImage]) -> Result<Vec<(usize, f64)>> {
        Ok(self
            .predict_proba(images)?
            .into_iter()
            .map(|p| {
                let c = argmax(&p);
                (c, p[c])
            })
            .collect())
    }
}

/// Scales 8-bit intensities to `[0, 1]`, appending one sample's network input to `out`.
pub fn push_image_tensor<T: Scalar>(img: &GrayImage, out: &mut Vec<T>) {
    let scale = T::from_f64_lossy(1.0 / 255.0);
    out.extend(img.data().iter().map(|&v| T::from_f64_lossy(v as f64) * scale));
}

pub(crate) fn check_sizes(images: &[GrayImage], expected: (usize, usize)) -> Result<()> {
    match images.iter().find(|img| img.dims() != expected) {
        Some(img) => Err(Error::Shape(format!(
            "image is {}x{} but the model expects {}x{}",
            img.width(),
            img.height(),
            expected.0,
            expected.1
        ))),
        None => Ok(()),
    }
}

/// A classifier that returns the same scores for every image.
///
/// Useful as a stand-in model when exercising pipelines without trained weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedScores {
    pub name: String,
    pub scores: Vec<f64>,
    pub input_size: (usize, usize),
}

impl FixedScores {
    pub fn new(name: impl Into<String>, scores: Vec<f64>, input_size: (usize, usize)) -> Self {
        Self { name: name.into(), scores, input_size }
    }
}

impl Classifier for FixedScores {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_classes(&self) -> usize {
        self.scores.len()
    }

    fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    fn parameter_count(&self) -> u64 {
        0
    }

    fn predict_proba(&self, images: &[GrayImage]) -> Result<Vec<Vec<f64>>> {
        check_sizes(images, self.input_size)?;
        Ok(vec![self.scores.clone(); images.len()])
    }
}
