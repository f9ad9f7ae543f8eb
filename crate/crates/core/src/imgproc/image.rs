//! Raster containers used by the segmentation stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single-channel 8-bit plane, row-major.
pub trait Raster: Sized + Clone {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn pixels(&self) -> &[u8];
    /// Builds a raster of the same kind from raw values. Values must satisfy the type's invariant.
    fn from_pixels(width: usize, height: usize, data: Vec<u8>) -> Result<Self>;

    #[inline]
    fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels()[y * self.width() + x]
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("{width}x{height} raster")));
    }
    if len != width * height {
        return Err(Error::Dimension(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Maps a binary mask to {0, 255}.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            data: mask.data.iter().map(|&v| v * 255).collect(),
        }
    }
}

impl Raster for GrayImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn pixels(&self) -> &[u8] {
        &self.data
    }
    fn from_pixels(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, data)
    }
}

/// Foreground/background labels: 1 is foreground (hand), 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Parameter(format!("mask value {bad} is not 0 or 1")));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = u8::from(v);
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

impl Raster for BinaryMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn pixels(&self) -> &[u8] {
        &self.data
    }
    fn from_pixels(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, data)
    }
}

/// Interleaved 8-bit RGB frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("{width}x{height} frame")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "rgb data length {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Gray replicated into all three channels.
    pub fn from_gray(img: &GrayImage) -> Self {
        let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
        Self { width: img.width(), height: img.height(), data }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Sets a pixel; coordinates outside the frame are ignored.
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }
}

/// Converts RGB to luma with the ITU-R 601 weights.
pub fn to_grayscale(frame: &RgbImage) -> GrayImage {
    let data = frame
        .data
        .chunks_exact(3)
        .map(|p| {
            let luma = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage { width: frame.width, height: frame.height, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_black_and_white() {
        let black = RgbImage::new(4, 3, vec![0; 36]).unwrap();
        assert!(to_grayscale(&black).data().iter().all(|&v| v == 0));
        let white = RgbImage::new(4, 3, vec![255; 36]).unwrap();
        assert!(to_grayscale(&white).data().iter().all(|&v| v == 255));
    }

    #[test]
    fn grayscale_mixed_pixel() {
        // 29.9 + 29.35 + 22.8 = 82.05
        let px = RgbImage::new(1, 1, vec![100, 50, 200]).unwrap();
        assert_eq!(to_grayscale(&px).data(), &[82]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(RgbImage::new(0, 3, vec![]), Err(Error::Dimension(_))));
        assert!(GrayImage::new(3, 0, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn mask_rejects_non_binary() {
        assert!(BinaryMask::new(2, 1, vec![0, 2]).is_err());
        assert!(BinaryMask::new(2, 1, vec![0, 1]).is_ok());
    }
}
