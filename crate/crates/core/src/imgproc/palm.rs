use serde::{Deserialize, Serialize};

use super::contour::Point;
use super::distance::distance_transform;
use super::image::BinaryMask;
use crate::error::{Error, Result};

/// Palm center (the deepest foreground pixel) and its distance to the nearest background pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmGeometry {
    pub center: Point,
    pub radius: f64,
}

pub fn palm_geometry(mask: &BinaryMask) -> Result<PalmGeometry> {
    if mask.count_foreground() == 0 {
        return Err(Error::NoHand("mask has no foreground pixels".into()));
    }
    let (x, y, radius) = distance_transform(mask).argmax();
    Ok(PalmGeometry { center: Point::new(x, y), radius })
}

/// Side length of the square hand crop for a palm radius.
pub fn crop_side(radius: f64, expand: f64) -> usize {
    ((2.0 * expand * radius).round() as usize).max(1)
}

/// Square window of side `round(2·expand·radius)` centered on the palm. Parts of the window that
/// fall outside the source read as background, so the result is always `side × side`.
pub fn crop_hand(mask: &BinaryMask, palm: &PalmGeometry, expand: f64) -> Result<BinaryMask> {
    if !(expand > 0.0) || !expand.is_finite() {
        return Err(Error::Parameter(format!("expand ratio {expand} must be positive")));
    }
    let side = crop_side(palm.radius, expand);
    let x0 = palm.center.x as isize - (side / 2) as isize;
    let y0 = palm.center.y as isize - (side / 2) as isize;
    BinaryMask::from_fn(side, side, |x, y| mask.get_signed(x0 + x as isize, y0 + y as isize))
}
