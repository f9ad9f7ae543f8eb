use super::image::Raster;
use crate::error::{Error, Result};

/// k×k median with replicated edges. `k` must be odd and at least 3.
pub fn median_filter<R: Raster>(img: &R, k: usize) -> Result<R> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::Parameter(format!("median window must be odd and >= 3, got {k}")));
    }
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let r = (k / 2) as isize;
    let mut window = Vec::with_capacity(k * k);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    window.push(px[sy * w + sx]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable(mid);
            out.push(*m);
        }
    }
    R::from_pixels(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::image::{BinaryMask, GrayImage};

    #[test]
    fn constant_unchanged() {
        let img = GrayImage::filled(6, 5, 77).unwrap();
        assert_eq!(median_filter(&img, 3).unwrap(), img);
        assert_eq!(median_filter(&img, 5).unwrap(), img);
    }

    #[test]
    fn salt_removed() {
        let img = GrayImage::from_fn(7, 7, |x, y| if (x, y) == (3, 3) { 255 } else { 0 }).unwrap();
        assert!(median_filter(&img, 3).unwrap().data().iter().all(|&v| v == 0));
    }

    #[test]
    fn center_of_one_to_nine() {
        let img = GrayImage::new(3, 3, (1..=9).collect()).unwrap();
        assert_eq!(median_filter(&img, 3).unwrap().get(1, 1), 5);
    }

    #[test]
    fn even_window_rejected() {
        let img = GrayImage::filled(3, 3, 0).unwrap();
        assert!(matches!(median_filter(&img, 4), Err(Error::Parameter(_))));
        assert!(median_filter(&img, 1).is_err());
    }

    #[test]
    fn works_on_masks() {
        let m = BinaryMask::from_fn(5, 5, |x, y| (x, y) != (2, 2)).unwrap();
        let f = median_filter(&m, 3).unwrap();
        assert_eq!(f.count_foreground(), 25);
    }
}
