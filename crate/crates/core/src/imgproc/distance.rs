//! Exact Euclidean distance transform (separable lower-envelope algorithm).

use super::image::BinaryMask;

/// Per-pixel distance to the nearest background pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DistanceMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Position of the maximum; ties resolve to the smallest y, then the smallest x.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, &v) in self.data.iter().enumerate() {
            if v > best.2 {
                best = (i % self.width, i / self.width, v);
            }
        }
        best
    }
}

/// Squared distance transform of a sampled function in one dimension. Entries equal to
/// `f64::INFINITY` contribute no parabola; at least one entry must be finite.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let parabola = |q: usize| f[q] + (q * q) as f64;
    let mut k = 0usize;
    let mut started = false;
    for q in 0..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let mut s;
        loop {
            let p = v[k];
            s = (parabola(q) - parabola(p)) / (2 * (q - p)) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    debug_assert!(started, "a row or column without any background sample");
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q.abs_diff(v[k]) as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance from every foreground pixel to the nearest background pixel, treating the
/// area outside the image as background. Background pixels map to 0.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = mask.dims();
    // one-pixel background frame around the image
    let (pw, ph) = (w + 2, h + 2);
    let mut grid = vec![0.0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                grid[(y + 1) * pw + x + 1] = f64::INFINITY;
            }
        }
    }

    let n = pw.max(ph);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..pw {
        for y in 0..ph {
            f[y] = grid[y * pw + x];
        }
        edt_1d(&f[..ph], &mut out[..ph], &mut v, &mut z);
        for y in 0..ph {
            grid[y * pw + x] = out[y];
        }
    }
    for y in 0..ph {
        let row = &mut grid[y * pw..(y + 1) * pw];
        f[..pw].copy_from_slice(row);
        edt_1d(&f[..pw], &mut out[..pw], &mut v, &mut z);
        row.copy_from_slice(&out[..pw]);
    }

    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(grid[(y + 1) * pw + x + 1].sqrt());
        }
    }
    DistanceMap { width: w, height: h, data }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// O(N^2) nearest-background search over the image plus its surrounding frame.
    pub(crate) fn brute_force(mask: &BinaryMask) -> Vec<f64> {
        let (w, h) = mask.dims();
        let (w, h) = (w as isize, h as isize);
        let mut bg = vec![];
        for y in -1..=h {
            for x in -1..=w {
                if !mask.get_signed(x, y) {
                    bg.push((x, y));
                }
            }
        }
        let mut out = vec![];
        for y in 0..h {
            for x in 0..w {
                if !mask.get_signed(x, y) {
                    out.push(0.0);
                    continue;
                }
                let best = bg.iter().map(|&(bx, by)| (bx - x).pow(2) + (by - y).pow(2)).min().unwrap();
                out.push((best as f64).sqrt());
            }
        }
        out
    }

    #[test]
    fn all_background_is_zero() {
        let m = BinaryMask::empty(9, 5).unwrap();
        assert!(distance_transform(&m).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_pixel_is_one() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (x, y) == (3, 3)).unwrap();
        assert_eq!(distance_transform(&m).get(3, 3), 1.0);
    }

    #[test]
    fn centered_square_peaks_at_four() {
        let m = BinaryMask::from_fn(11, 11, |x, y| (2..9).contains(&x) && (2..9).contains(&y)).unwrap();
        let dt = distance_transform(&m);
        assert_eq!(dt.data, brute_force(&m));
        let (x, y, v) = dt.argmax();
        assert_eq!((x, y, v), (5, 5, 4.0));
    }

    #[test]
    fn full_mask_uses_border() {
        let m = BinaryMask::from_fn(5, 3, |_, _| true).unwrap();
        let dt = distance_transform(&m);
        assert_eq!(dt.data, brute_force(&m));
        assert_eq!(dt.get(2, 1), 2.0);
    }

    #[test]
    fn argmax_tie_break() {
        let dm = DistanceMap { width: 3, height: 2, data: vec![0.0, 2.0, 2.0, 2.0, 1.0, 0.0] };
        assert_eq!(dm.argmax(), (1, 0, 2.0));
    }
}
