//! Dense kernels shared by the layers: im2col convolution, pooling, normalization.

use crate::Scalar;

/// Geometry of a 2-D convolution or pooling window over one CHW sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub channels: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub k: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl Window {
    pub fn positions(&self) -> usize {
        self.h_out * self.w_out
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.h_in * self.w_in
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.channels * self.k * self.k
    }

    /// True when the im2col matrix is the input itself (1×1, stride 1, no padding).
    pub fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad_top == 0 && self.pad_left == 0
    }

    #[inline]
    fn source(&self, o: usize, kk: usize, pad: usize, limit: usize) -> Option<usize> {
        let i = (o * self.stride + kk) as isize - pad as isize;
        (i >= 0 && (i as usize) < limit).then_some(i as usize)
    }

    /// Output columns `lo..hi` whose source column for kernel offset `kj` lies inside the input.
    #[inline]
    fn valid_columns(&self, kj: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad_left > kj { (self.pad_left - kj).div_ceil(s) } else { 0 };
        let reach = self.w_in - 1 + self.pad_left;
        let hi = if reach >= kj { ((reach - kj) / s + 1).min(self.w_out) } else { 0 };
        (lo.min(hi), hi)
    }
}

/// Unfolds one sample into a `patch_len × positions` matrix (row-major).
pub fn im2col<T: Scalar>(x: &[T], g: &Window, col: &mut [T]) {
    let p = g.positions();
    let plane = g.h_in * g.w_in;
    for c in 0..g.channels {
        let src = &x[c * plane..(c + 1) * plane];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = ((c * g.k + ki) * g.k + kj) * p;
                for oy in 0..g.h_out {
                    let dst = &mut col[row + oy * g.w_out..row + (oy + 1) * g.w_out];
                    let Some(iy) = g.source(oy, ki, g.pad_top, g.h_in) else {
                        dst.fill(T::zero());
                        continue;
                    };
                    let src_row = &src[iy * g.w_in..(iy + 1) * g.w_in];
                    let (lo, hi) = g.valid_columns(kj);
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    if lo == hi {
                        continue;
                    }
                    let first = lo * g.stride + kj - g.pad_left;
                    if g.stride == 1 {
                        dst[lo..hi].copy_from_slice(&src_row[first..first + hi - lo]);
                    } else {
                        for (d, ix) in dst[lo..hi].iter_mut().zip((first..).step_by(g.stride)) {
                            *d = src_row[ix];
                        }
                    }
                }
            }
        }
    }
}

/// Folds a column-gradient matrix back onto the input, accumulating overlaps.
pub fn col2im<T: Scalar>(col: &[T], g: &Window, dx: &mut [T]) {
    let p = g.positions();
    let plane = g.h_in * g.w_in;
    for c in 0..g.channels {
        let dst = &mut dx[c * plane..(c + 1) * plane];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = ((c * g.k + ki) * g.k + kj) * p;
                for oy in 0..g.h_out {
                    let Some(iy) = g.source(oy, ki, g.pad_top, g.h_in) else { continue };
                    let src = &col[row + oy * g.w_out..row + (oy + 1) * g.w_out];
                    let (lo, hi) = g.valid_columns(kj);
                    if lo == hi {
                        continue;
                    }
                    let first = lo * g.stride + kj - g.pad_left;
                    let dst_row = &mut dst[iy * g.w_in..(iy + 1) * g.w_in];
                    if g.stride == 1 {
                        for (d, &v) in dst_row[first..first + hi - lo].iter_mut().zip(&src[lo..hi]) {
                            *d += v;
                        }
                    } else {
                        for (&v, ix) in src[lo..hi].iter().zip((first..).step_by(g.stride)) {
                            dst_row[ix] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling over one sample; returns outputs and, per output, the flat input index chosen.
/// Padding cells never win. Ties keep the first maximum in window order.
pub fn max_pool<T: Scalar>(x: &[T], g: &Window, out: &mut [T], argmax: &mut [u32]) {
    let plane = g.h_in * g.w_in;
    for c in 0..g.channels {
        for oy in 0..g.h_out {
            for ox in 0..g.w_out {
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                let mut found = false;
                for ki in 0..g.k {
                    let Some(iy) = g.source(oy, ki, g.pad_top, g.h_in) else { continue };
                    for kj in 0..g.k {
                        let Some(ix) = g.source(ox, kj, g.pad_left, g.w_in) else { continue };
                        let idx = c * plane + iy * g.w_in + ix;
                        if !found || x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                            found = true;
                        }
                    }
                }
                let o = (c * g.h_out + oy) * g.w_out + ox;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}
