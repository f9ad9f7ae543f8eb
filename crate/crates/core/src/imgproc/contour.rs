//! Connected-component contours via outer border following on 8-connectivity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::image::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Chebyshev adjacency (the 8-neighborhood).
    pub fn is_8_adjacent(&self, other: &Point) -> bool {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }
}

/// Outer boundary of one 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    /// Closed chain: consecutive points are 8-adjacent and the last point is adjacent to the first.
    pub boundary: Vec<Point>,
    /// Number of pixels in the component (not the polygon area).
    pub area: usize,
    pub bbox: BBox,
}

// Neighbor offsets in clockwise order (y grows downward), starting east.
const DIRS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const WEST: usize = 4;

fn dir_between(from: Point, to: Point) -> usize {
    let d = (to.x as isize - from.x as isize, to.y as isize - from.y as isize);
    DIRS.iter().position(|&o| o == d).expect("points are 8-adjacent")
}

fn step(p: Point, d: usize, mask: &BinaryMask) -> Option<Point> {
    let (dx, dy) = DIRS[d];
    let (x, y) = (p.x as isize + dx, p.y as isize + dy);
    mask.get_signed(x, y).then(|| Point::new(x as usize, y as usize))
}

/// Follows the outer border starting at the component's topmost-leftmost pixel.
fn trace_outer_border(mask: &BinaryMask, start: Point) -> Vec<Point> {
    // clockwise sweep from the (background) west neighbor
    let first = (0..8).find_map(|k| step(start, (WEST + k) % 8, mask));
    let Some(first) = first else {
        return vec![start];
    };

    let mut boundary = Vec::new();
    let (mut prev, mut cur) = (first, start);
    loop {
        let back = dir_between(cur, prev);
        // counterclockwise sweep beginning just after the pixel we came from
        let next = (1..=8)
            .find_map(|k| step(cur, (back + 8 - k) % 8, mask))
            .expect("prev itself is foreground");
        boundary.push(cur);
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    boundary
}

/// Per-pixel component labels (0 = background, components numbered from 1 in raster order of
/// their first pixel) and per-component pixel counts.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            let id = sizes.len() as u32 + 1;
            labels[y * w + x] = id;
            queue.push_back(Point::new(x, y));
            let mut size = 0;
            while let Some(p) = queue.pop_front() {
                size += 1;
                for d in 0..8 {
                    if let Some(q) = step(p, d, mask) {
                        let idx = q.y * w + q.x;
                        if labels[idx] == 0 {
                            labels[idx] = id;
                            queue.push_back(q);
                        }
                    }
                }
            }
            sizes.push(size);
        }
    }
    (labels, sizes)
}

/// One contour per 8-connected component, in raster order of each component's first pixel.
pub fn extract_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = mask.dims();
    let (labels, sizes) = label_components(mask);
    let n = sizes.len();
    let mut starts: Vec<Option<Point>> = vec![None; n];
    let mut boxes: Vec<Option<BBox>> = vec![None; n];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let i = l as usize - 1;
            starts[i].get_or_insert(Point::new(x, y));
            let b = boxes[i].get_or_insert(BBox { x_min: x, y_min: y, x_max: x, y_max: y });
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_max = b.y_max.max(y);
        }
    }
    (0..n)
        .map(|i| Contour {
            boundary: trace_outer_border(mask, starts[i].expect("component has pixels")),
            area: sizes[i],
            bbox: boxes[i].expect("component has pixels"),
        })
        .collect()
}

/// Maximum-area contour; ties go to the smaller `x_min`, then the smaller `y_min`.
pub fn largest_contour(contours: &[Contour]) -> Result<&Contour> {
    contours
        .iter()
        .min_by(|a, b| {
            b.area
                .cmp(&a.area)
                .then(a.bbox.x_min.cmp(&b.bbox.x_min))
                .then(a.bbox.y_min.cmp(&b.bbox.y_min))
        })
        .ok_or_else(|| Error::NoHand("no foreground contour".into()))
}

/// The pixels of the component a contour was traced from.
pub fn component_mask(mask: &BinaryMask, contour: &Contour) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut out = BinaryMask::empty(w, h).expect("dims come from a valid mask");
    let Some(&seed) = contour.boundary.first() else {
        return out;
    };
    if !mask.get(seed.x, seed.y) {
        return out;
    }
    let mut queue = VecDeque::from([seed]);
    out.set(seed.x, seed.y, true);
    while let Some(p) = queue.pop_front() {
        for d in 0..8 {
            if let Some(q) = step(p, d, mask) {
                if !out.get(q.x, q.y) {
                    out.set(q.x, q.y, true);
                    queue.push_back(q);
                }
            }
        }
    }
    out
}
