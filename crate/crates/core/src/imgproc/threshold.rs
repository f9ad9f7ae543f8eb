use serde::{Deserialize, Serialize};

use super::image::{BinaryMask, GrayImage};
use crate::error::{Error, Result};

/// How the binarization threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Otsu's method over the 256-bin histogram.
    #[default]
    Auto,
    Fixed(u8),
}

impl std::str::FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") || s.eq_ignore_ascii_case("otsu") {
            return Ok(Threshold::Auto);
        }
        s.parse::<u8>()
            .map(Threshold::Fixed)
            .map_err(|_| Error::Parameter(format!("threshold must be 0-255 or 'auto', got {s:?}")))
    }
}

/// Pixel becomes foreground iff its intensity is strictly greater than the threshold.
pub fn threshold_binary(img: &GrayImage, threshold: Threshold) -> BinaryMask {
    let t = match threshold {
        Threshold::Fixed(t) => t,
        Threshold::Auto => otsu_threshold(img),
    };
    let data = img.data().iter().map(|&v| u8::from(v > t)).collect();
    BinaryMask::new(img.width(), img.height(), data).expect("dimensions come from a valid image")
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    hist
}

/// Threshold maximizing the between-class variance `w0·w1·(mu0 - mu1)^2`, where class 0 holds
/// intensities `<= t`.
///
/// Histograms with gaps produce a plateau of equally good thresholds; the midpoint of the first
/// and last maximizer is returned so the cut lands between the modes.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let hist = histogram(img);
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();

    let mut best = f64::NEG_INFINITY;
    let (mut first, mut last) = (0usize, 0usize);
    let (mut w0, mut sum0) = (0u64, 0u64);
    for t in 0..256 {
        w0 += hist[t];
        sum0 += t as u64 * hist[t];
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 as f64 / w0 as f64;
        let mu1 = (total_sum - sum0) as f64 / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if var > best {
            best = var;
            first = t;
            last = t;
        } else if var == best {
            last = t;
        }
    }
    if best == f64::NEG_INFINITY {
        // single-valued image: everything is background
        return 255;
    }
    ((first + last) / 2) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive search computing the variance from scratch at every threshold.
    fn brute_otsu_maximizers(img: &GrayImage) -> Vec<usize> {
        let px = img.data();
        let mut scores = vec![];
        for t in 0..256usize {
            let lo: Vec<f64> = px.iter().filter(|&&v| v as usize <= t).map(|&v| v as f64).collect();
            let hi: Vec<f64> = px.iter().filter(|&&v| v as usize > t).map(|&v| v as f64).collect();
            if lo.is_empty() || hi.is_empty() {
                scores.push(f64::NEG_INFINITY);
                continue;
            }
            let n = px.len() as f64;
            let (w0, w1) = (lo.len() as f64 / n, hi.len() as f64 / n);
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            scores.push(w0 * w1 * (m0 - m1).powi(2));
        }
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (0..256).filter(|&t| (scores[t] - best).abs() <= 1e-9 * best.abs()).collect()
    }

    #[test]
    fn constant_below_threshold() {
        let img = GrayImage::filled(5, 4, 10).unwrap();
        assert_eq!(threshold_binary(&img, Threshold::Fixed(128)).count_foreground(), 0);
    }

    #[test]
    fn direct_comparison() {
        let img = GrayImage::new(2, 1, vec![100, 200]).unwrap();
        assert_eq!(threshold_binary(&img, Threshold::Fixed(150)).data(), &[0, 1]);
        // equality stays background
        let img = GrayImage::new(1, 1, vec![150]).unwrap();
        assert_eq!(threshold_binary(&img, Threshold::Fixed(150)).data(), &[0]);
    }

    #[test]
    fn otsu_bimodal_separates_halves() {
        let img = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 50 } else { 200 }).unwrap();
        let maximizers = brute_otsu_maximizers(&img);
        assert_eq!(maximizers.first(), Some(&50));
        assert_eq!(maximizers.last(), Some(&199));
        let t = otsu_threshold(&img);
        assert!(t > 50 && t < 200, "t = {t}");
        assert!(maximizers.contains(&(t as usize)));
        let mask = threshold_binary(&img, Threshold::Auto);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(mask.get(x, y), x >= 4);
            }
        }
    }

    #[test]
    fn otsu_agrees_with_exhaustive_search_on_noisy_histogram() {
        let mut state = 12345u64;
        let img = GrayImage::from_fn(32, 32, |x, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = (state >> 59) as u8;
            if x < 12 { 40 + noise } else { 170 + noise }
        })
        .unwrap();
        let t = otsu_threshold(&img) as usize;
        assert!(brute_otsu_maximizers(&img).contains(&t));
    }

    #[test]
    fn parse_threshold() {
        assert_eq!("auto".parse::<Threshold>().unwrap(), Threshold::Auto);
        assert_eq!("42".parse::<Threshold>().unwrap(), Threshold::Fixed(42));
        assert!("300".parse::<Threshold>().is_err());
    }
}
