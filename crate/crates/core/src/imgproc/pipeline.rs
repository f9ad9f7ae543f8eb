//! The offline hand-extraction chain shared by dataset preprocessing and the live loop.

use serde::{Deserialize, Serialize};

use super::contour::{component_mask, extract_contours, largest_contour, BBox};
use super::filter::median_filter;
use super::image::{BinaryMask, GrayImage};
use super::palm::{crop_hand, palm_geometry, PalmGeometry};
use super::resize::Resize;
use super::threshold::{threshold_binary, Threshold};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    /// Median filter on the crop, then resize.
    #[default]
    FilterThenResize,
    ResizeThenFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub threshold: Threshold,
    pub expand_ratio: f64,
    pub median_window: usize,
    pub target_width: usize,
    pub target_height: usize,
    pub order: FilterOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            threshold: Threshold::Auto,
            expand_ratio: 1.4,
            median_window: 5,
            target_width: 64,
            target_height: 64,
            order: FilterOrder::FilterThenResize,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.expand_ratio > 0.0) {
            return Err(Error::Parameter(format!("expand ratio {} must be positive", self.expand_ratio)));
        }
        if self.median_window < 3 || self.median_window.is_multiple_of(2) {
            return Err(Error::Parameter(format!("median window {} must be odd and >= 3", self.median_window)));
        }
        if self.target_width == 0 || self.target_height == 0 {
            return Err(Error::Dimension("target size must be positive".into()));
        }
        Ok(())
    }
}

/// Result of locating and extracting the hand.
#[derive(Debug, Clone, PartialEq)]
pub struct HandRegion {
    pub bbox: BBox,
    pub area: usize,
    pub palm: PalmGeometry,
    /// Network input: the filtered, resized hand mask rendered as {0, 255}.
    pub input: GrayImage,
}

/// Largest component → palm → crop → median → resize, starting from a foreground mask.
pub fn extract_hand(mask: &BinaryMask, cfg: &PreprocessConfig) -> Result<HandRegion> {
    cfg.validate()?;
    let contours = extract_contours(mask);
    let hand = largest_contour(&contours)?;
    let component = component_mask(mask, hand);
    let palm = palm_geometry(&component)?;
    let crop = crop_hand(&component, &palm, cfg.expand_ratio)?;
    let (w, h) = (cfg.target_width, cfg.target_height);
    let out = match cfg.order {
        FilterOrder::FilterThenResize => median_filter(&crop, cfg.median_window)?.resize(w, h)?,
        FilterOrder::ResizeThenFilter => median_filter(&crop.resize(w, h)?, cfg.median_window)?,
    };
    Ok(HandRegion { bbox: hand.bbox, area: hand.area, palm, input: GrayImage::from_mask(&out) })
}

/// Threshold a grayscale frame and extract the hand.
pub fn preprocess_gray(img: &GrayImage, cfg: &PreprocessConfig) -> Result<HandRegion> {
    extract_hand(&threshold_binary(img, cfg.threshold), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_like() -> GrayImage {
        // palm disk plus a forearm strip and a speck of noise
        GrayImage::from_fn(120, 100, |x, y| {
            let (dx, dy) = (x as f64 - 60.0, y as f64 - 40.0);
            let palm = dx * dx + dy * dy <= 15.0 * 15.0;
            let arm = (52..68).contains(&x) && y >= 40;
            let speck = (x, y) == (5, 5);
            if palm || arm || speck { 210 } else { 15 }
        })
        .unwrap()
    }

    #[test]
    fn produces_target_sized_binary_input() {
        let r = preprocess_gray(&hand_like(), &PreprocessConfig::default()).unwrap();
        assert_eq!(r.input.dims(), (64, 64));
        assert!(r.input.data().iter().all(|&v| v == 0 || v == 255));
        assert!(r.input.data().contains(&255));
        assert!((r.palm.center.x as i64 - 60).abs() <= 1);
        assert!((r.palm.center.y as i64 - 40).abs() <= 2);
    }

    #[test]
    fn blank_frame_is_no_hand() {
        let img = GrayImage::filled(40, 40, 30).unwrap();
        assert!(matches!(preprocess_gray(&img, &PreprocessConfig::default()), Err(Error::NoHand(_))));
    }

    #[test]
    fn both_orders_supported() {
        let cfg = PreprocessConfig { order: FilterOrder::ResizeThenFilter, ..Default::default() };
        let r = preprocess_gray(&hand_like(), &cfg).unwrap();
        assert_eq!(r.input.dims(), (64, 64));
    }

    #[test]
    fn deterministic() {
        let cfg = PreprocessConfig::default();
        assert_eq!(
            preprocess_gray(&hand_like(), &cfg).unwrap().input,
            preprocess_gray(&hand_like(), &cfg).unwrap().input
        );
    }
}
