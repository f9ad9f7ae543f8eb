use serde::{Deserialize, Serialize};

use super::image::{BinaryMask, GrayImage};
use crate::error::{Error, Result};

/// Per-pixel running-average background estimate.
///
/// Single writer: one model per video stream, updated in frame order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    accumulator: Option<Vec<f64>>,
    width: usize,
    height: usize,
    learning_rate: f64,
    diff_threshold: f64,
}

impl Default for BackgroundModel {
    fn default() -> Self {
        Self::new(0.05, 25.0).expect("defaults are valid")
    }
}

impl BackgroundModel {
    pub fn new(learning_rate: f64, diff_threshold: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::Parameter(format!("learning rate {learning_rate} outside (0, 1]")));
        }
        if !(diff_threshold >= 0.0) {
            return Err(Error::Parameter(format!("diff threshold {diff_threshold} < 0")));
        }
        Ok(Self { accumulator: None, width: 0, height: 0, learning_rate, diff_threshold })
    }

    pub fn is_initialized(&self) -> bool {
        self.accumulator.is_some()
    }

    pub fn accumulator(&self) -> Option<&[f64]> {
        self.accumulator.as_deref()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn diff_threshold(&self) -> f64 {
        self.diff_threshold
    }

    fn check_dims(&self, frame: &GrayImage) -> Result<()> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::Dimension(format!(
                "frame {:?} does not match background {}x{}",
                frame.dims(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    /// `acc <- (1 - rate)·acc + rate·frame`. An uninitialized model adopts the frame.
    pub fn update(&mut self, frame: &GrayImage) -> Result<()> {
        match &mut self.accumulator {
            None => {
                self.width = frame.width();
                self.height = frame.height();
                self.accumulator = Some(frame.data().iter().map(|&v| f64::from(v)).collect());
            }
            Some(_) => {
                self.check_dims(frame)?;
                let rate = self.learning_rate;
                let acc = self.accumulator.as_mut().expect("checked above");
                for (a, &v) in acc.iter_mut().zip(frame.data()) {
                    *a = (1.0 - rate) * *a + rate * f64::from(v);
                }
            }
        }
        Ok(())
    }

    /// Foreground where `|frame - acc| > diff_threshold`.
    pub fn subtract(&self, frame: &GrayImage) -> Result<BinaryMask> {
        let acc = self
            .accumulator
            .as_ref()
            .ok_or_else(|| Error::Parameter("background model is not initialized".into()))?;
        self.check_dims(frame)?;
        let data = frame
            .data()
            .iter()
            .zip(acc)
            .map(|(&v, &a)| u8::from((f64::from(v) - a).abs() > self.diff_threshold))
            .collect();
        BinaryMask::new(self.width, self.height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninitialized_adopts_frame() {
        let mut m = BackgroundModel::default();
        let f = GrayImage::from_fn(3, 2, |x, y| (x * 10 + y) as u8).unwrap();
        m.update(&f).unwrap();
        let expect: Vec<f64> = f.data().iter().map(|&v| v as f64).collect();
        assert_eq!(m.accumulator().unwrap(), expect.as_slice());
    }

    #[test]
    fn full_rate_replaces() {
        let mut m = BackgroundModel::new(1.0, 25.0).unwrap();
        m.update(&GrayImage::filled(2, 2, 7).unwrap()).unwrap();
        let f = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        m.update(&f).unwrap();
        assert_eq!(m.accumulator().unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn running_average_step() {
        let mut m = BackgroundModel::new(0.1, 25.0).unwrap();
        m.update(&GrayImage::filled(1, 1, 100).unwrap()).unwrap();
        m.update(&GrayImage::filled(1, 1, 200).unwrap()).unwrap();
        assert!((m.accumulator().unwrap()[0] - 110.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = BackgroundModel::default();
        m.update(&GrayImage::filled(2, 2, 0).unwrap()).unwrap();
        assert!(matches!(m.update(&GrayImage::filled(3, 2, 0).unwrap()), Err(Error::Dimension(_))));
        assert!(m.subtract(&GrayImage::filled(3, 2, 0).unwrap()).is_err());
    }

    #[test]
    fn subtract_requires_init() {
        let m = BackgroundModel::default();
        assert!(m.subtract(&GrayImage::filled(2, 2, 0).unwrap()).is_err());
    }

    #[test]
    fn identical_frame_is_empty() {
        let mut m = BackgroundModel::default();
        let f = GrayImage::from_fn(5, 5, |x, y| (x * 40 + y) as u8).unwrap();
        m.update(&f).unwrap();
        assert_eq!(m.subtract(&f).unwrap().count_foreground(), 0);
    }

    #[test]
    fn bright_patch_detected() {
        let mut m = BackgroundModel::new(0.05, 50.0).unwrap();
        m.update(&GrayImage::filled(30, 30, 0).unwrap()).unwrap();
        let f = GrayImage::from_fn(30, 30, |x, y| {
            if (5..15).contains(&x) && (8..18).contains(&y) { 255 } else { 0 }
        })
        .unwrap();
        let mask = m.subtract(&f).unwrap();
        assert_eq!(mask.count_foreground(), 100);
        for y in 0..30 {
            for x in 0..30 {
                assert_eq!(mask.get(x, y), (5..15).contains(&x) && (8..18).contains(&y));
            }
        }
    }

    #[test]
    fn max_threshold_never_fires() {
        let mut m = BackgroundModel::new(0.05, 255.0).unwrap();
        m.update(&GrayImage::filled(4, 4, 0).unwrap()).unwrap();
        assert_eq!(m.subtract(&GrayImage::filled(4, 4, 255).unwrap()).unwrap().count_foreground(), 0);
    }

    #[test]
    fn rate_validation() {
        assert!(BackgroundModel::new(0.0, 10.0).is_err());
        assert!(BackgroundModel::new(1.5, 10.0).is_err());
    }
}
