use super::image::{BinaryMask, GrayImage, Raster};
use crate::error::{Error, Result};

/// Rasters that can be resampled to new dimensions.
pub trait Resize: Raster {
    fn resize(&self, width: usize, height: usize) -> Result<Self>;
}

fn check_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("resize target {width}x{height}")));
    }
    Ok(())
}

/// Bilinear resampling with pixel-center alignment; output rounded to the nearest integer.
fn bilinear(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<u8> {
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    let axis = |d: usize, scale: f64, n: usize| -> (usize, usize, f64) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sy, sh);
        for x in 0..dw {
            let (x0, x1, fx) = axis(x, sx, sw);
            let p = |xx: usize, yy: usize| f64::from(src[yy * sw + xx]);
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

impl Resize for GrayImage {
    fn resize(&self, width: usize, height: usize) -> Result<Self> {
        check_target(width, height)?;
        GrayImage::new(width, height, bilinear(self.data(), self.width(), self.height(), width, height))
    }
}

impl Resize for BinaryMask {
    /// Bilinear on {0, 255}, then re-thresholded at 127 so the result stays binary.
    fn resize(&self, width: usize, height: usize) -> Result<Self> {
        check_target(width, height)?;
        let scaled: Vec<u8> = self.data().iter().map(|&v| v * 255).collect();
        let out = bilinear(&scaled, self.width(), self.height(), width, height)
            .into_iter()
            .map(|v| u8::from(v > 127))
            .collect();
        BinaryMask::new(width, height, out)
    }
}

pub fn resize<R: Resize>(img: &R, width: usize, height: usize) -> Result<R> {
    img.resize(width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_dims_identity() {
        let img = GrayImage::from_fn(9, 7, |x, y| (x * 31 + y * 17) as u8).unwrap();
        assert_eq!(resize(&img, 9, 7).unwrap(), img);
    }

    #[test]
    fn checkerboard_to_single_pixel() {
        let img = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        let v = resize(&img, 1, 1).unwrap().get(0, 0);
        assert!(v == 127 || v == 128, "{v}");
    }

    #[test]
    fn full_mask_stays_full() {
        let m = BinaryMask::from_fn(13, 29, |_, _| true).unwrap();
        let r = resize(&m, 64, 64).unwrap();
        assert_eq!(r.count_foreground(), 64 * 64);
    }

    #[test]
    fn zero_target_rejected() {
        let img = GrayImage::filled(2, 2, 1).unwrap();
        assert!(resize(&img, 0, 4).is_err());
    }

    #[test]
    fn upscale_constant_preserved() {
        let img = GrayImage::filled(3, 5, 200).unwrap();
        assert!(resize(&img, 64, 64).unwrap().data().iter().all(|&v| v == 200));
    }
}
