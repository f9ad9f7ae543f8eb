//! Training-time geometric augmentation: rotation, zoom, shift and flips.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Maximum absolute rotation in degrees.
    pub rotation_deg: f64,
    /// Maximum relative zoom, in [0, 1).
    pub zoom: f64,
    /// Maximum translation as a fraction of each dimension.
    pub shift_frac: f64,
    pub hflip: bool,
    pub vflip: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { rotation_deg: 15.0, zoom: 0.1, shift_frac: 0.1, hflip: true, vflip: false, seed: 0 }
    }
}

impl AugmentConfig {
    /// No-op configuration.
    pub fn identity() -> Self {
        Self { rotation_deg: 0.0, zoom: 0.0, shift_frac: 0.0, hflip: false, vflip: false, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation_deg < 0.0 || self.shift_frac < 0.0 || !(0.0..1.0).contains(&self.zoom) {
            return Err(Error::Parameter(format!("invalid augmentation magnitudes {self:?}")));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.zoom == 0.0 && self.shift_frac == 0.0 && !self.hflip && !self.vflip
    }
}

/// One concrete draw of transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    /// Counterclockwise as displayed (y axis pointing down).
    pub angle_deg: f64,
    /// Scale factor; > 1 magnifies.
    pub zoom: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self { angle_deg: 0.0, zoom: 1.0, shift_x: 0.0, shift_y: 0.0, hflip: false, vflip: false }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.gen_range(-half_width..=half_width)
    }
}

pub fn sample_params<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> AffineParams {
    AffineParams {
        angle_deg: uniform(rng, cfg.rotation_deg),
        zoom: 1.0 + uniform(rng, cfg.zoom),
        shift_x: uniform(rng, cfg.shift_frac),
        shift_y: uniform(rng, cfg.shift_frac),
        hflip: cfg.hflip && rng.gen_bool(0.5),
        vflip: cfg.vflip && rng.gen_bool(0.5),
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 { r } else { v }
}

/// Applies the transform by inverse mapping with bilinear sampling; uncovered pixels become 0.
pub fn apply_affine(img: &GrayImage, p: &AffineParams) -> GrayImage {
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = p.angle_deg.to_radians().sin_cos();
    let (tx, ty) = (p.shift_x * w as f64, p.shift_y * h as f64);
    let read = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            f64::from(img.get(x as usize, y as usize))
        }
    };
    GrayImage::from_fn(w, h, |x, y| {
        let u = (x as f64 - cx - tx) / p.zoom;
        let v = (y as f64 - cy - ty) / p.zoom;
        let mut sx = snap(cos * u - sin * v + cx);
        let mut sy = snap(sin * u + cos * v + cy);
        if p.hflip {
            sx = w as f64 - 1.0 - sx;
        }
        if p.vflip {
            sy = h as f64 - 1.0 - sy;
        }
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = read(x0, y0) * (1.0 - fx) + read(x0 + 1, y0) * fx;
        let bottom = read(x0, y0 + 1) * (1.0 - fx) + read(x0 + 1, y0 + 1) * fx;
        (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
    })
    .expect("dimensions come from a valid image")
}

/// Random augmentation drawn from `cfg` using the caller's generator.
pub fn augment<R: Rng + ?Sized>(img: &GrayImage, cfg: &AugmentConfig, rng: &mut R) -> GrayImage {
    if cfg.is_identity() {
        return img.clone();
    }
    apply_affine(img, &sample_params(cfg, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn identity_config_is_bit_exact() {
        let img = GrayImage::from_fn(17, 11, |x, y| (x * 13 + y * 7) as u8).unwrap();
        let mut rng = seeded(5);
        assert_eq!(augment(&img, &AugmentConfig::identity(), &mut rng), img);
        assert_eq!(apply_affine(&img, &AffineParams::default()), img);
    }

    #[test]
    fn horizontal_flip() {
        let img = GrayImage::new(2, 1, vec![10, 20]).unwrap();
        let out = apply_affine(&img, &AffineParams { hflip: true, ..Default::default() });
        assert_eq!(out.data(), &[20, 10]);
    }

    #[test]
    fn quarter_turn_is_index_permutation() {
        let img = GrayImage::new(3, 3, (1..=9).collect()).unwrap();
        let out = apply_affine(&img, &AffineParams { angle_deg: 90.0, ..Default::default() });
        // counterclockwise: out(x, y) = in(2 - y, x)
        let expected = GrayImage::from_fn(3, 3, |x, y| img.get(2 - y, x)).unwrap();
        assert_eq!(out, expected);
        assert_eq!(out.data(), &[3, 6, 9, 2, 5, 8, 1, 4, 7]);
    }

    #[test]
    fn shift_moves_content() {
        let img = GrayImage::from_fn(10, 10, |x, y| if (x, y) == (2, 3) { 200 } else { 0 }).unwrap();
        let out = apply_affine(&img, &AffineParams { shift_x: 0.3, ..Default::default() });
        assert_eq!(out.get(5, 3), 200);
        assert_eq!(out.get(2, 3), 0);
    }

    #[test]
    fn validate_rejects_negative() {
        let cfg = AugmentConfig { rotation_deg: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(AugmentConfig { zoom: 1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn dims_preserved(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let img = GrayImage::from_fn(w, h, |x, y| ((x * 31) ^ (y * 17)) as u8).unwrap();
            let mut rng = seeded(seed);
            let cfg = AugmentConfig { vflip: true, rotation_deg: 40.0, zoom: 0.3, shift_frac: 0.2, ..Default::default() };
            prop_assert_eq!(augment(&img, &cfg, &mut rng).dims(), (w, h));
        }
    }
}
