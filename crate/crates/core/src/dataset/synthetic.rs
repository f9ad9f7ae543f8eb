//! Filled-shape toy dataset (disk / square / triangle) for smoke tests and demos.

use std::path::Path;

use rand::Rng;

use super::manifest::DatasetManifest;
use super::rng::seeded;
use crate::error::Result;
use crate::imgproc::io::save_gray;
use crate::imgproc::GrayImage;

pub const SHAPE_CLASSES: [&str; 3] = ["disk", "square", "triangle"];

fn inside_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    // all cross products share a sign for a convex polygon
    let mut sign = 0.0f64;
    for i in 0..verts.len() {
        let (ax, ay) = verts[i];
        let (bx, by) = verts[(i + 1) % verts.len()];
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        if cross != 0.0 {
            if sign != 0.0 && cross.signum() != sign {
                return false;
            }
            sign = cross.signum();
        }
    }
    true
}

/// Renders one white shape on black. `class` indexes [`SHAPE_CLASSES`].
///
/// Shapes are roughly centred, upright and of similar size, like hand crops after preprocessing.
pub fn render_shape<R: Rng + ?Sized>(class: usize, size: usize, rng: &mut R) -> GrayImage {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let s = size as f64;
    let radius = rng.gen_range(0.30 * s..0.34 * s);
    let jitter = 0.03 * s;
    let cx = (s - 1.0) / 2.0 + rng.gen_range(-jitter..jitter);
    let cy = (s - 1.0) / 2.0 + rng.gen_range(-jitter..jitter);
    let tilt = rng.gen_range(-0.15..0.15);
    let theta = match class {
        1 => FRAC_PI_4 + tilt,
        _ => -FRAC_PI_2 + tilt,
    };
    let polygon = |n: usize, r: f64| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let a = theta + k as f64 * std::f64::consts::TAU / n as f64;
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect()
    };
    let verts = match class {
        1 => polygon(4, radius * 1.1),
        2 => polygon(3, radius * 1.2),
        _ => Vec::new(),
    };
    GrayImage::from_fn(size, size, |x, y| {
        let (px, py) = (x as f64, y as f64);
        let hit = if class == 0 {
            (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius
        } else {
            inside_polygon(px, py, &verts)
        };
        if hit { 255 } else { 0 }
    })
    .expect("size is positive")
}

/// `per_class` images of each shape, labels in class order.
pub fn synthetic_shapes(per_class: usize, size: usize, seed: u64) -> (Vec<GrayImage>, Vec<usize>) {
    let mut rng = seeded(seed);
    let mut images = Vec::with_capacity(per_class * SHAPE_CLASSES.len());
    let mut labels = Vec::with_capacity(per_class * SHAPE_CLASSES.len());
    for class in 0..SHAPE_CLASSES.len() {
        for _ in 0..per_class {
            images.push(render_shape(class, size, &mut rng));
            labels.push(class);
        }
    }
    (images, labels)
}

/// Writes the shape dataset as `root/<class>/<nnnn>.png` and ingests it.
pub fn write_synthetic_dataset(root: &Path, per_class: usize, size: usize, seed: u64) -> Result<DatasetManifest> {
    let (images, labels) = synthetic_shapes(per_class, size, seed);
    for (i, (img, &label)) in images.iter().zip(&labels).enumerate() {
        let path = root.join(SHAPE_CLASSES[label]).join(format!("{:04}.png", i % per_class));
        save_gray(img, &path)?;
    }
    DatasetManifest::ingest(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_nonempty_and_deterministic() {
        let (a, la) = synthetic_shapes(4, 64, 3);
        let (b, _) = synthetic_shapes(4, 64, 3);
        assert_eq!(a, b);
        assert_eq!(la, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
        for img in &a {
            let fg = img.data().iter().filter(|&&v| v == 255).count();
            assert!(fg > 50, "{fg}");
        }
    }

    /// Nearest class-mean classifier on raw pixels.
    fn nearest_centroid_accuracy(images: &[GrayImage], labels: &[usize]) -> f64 {
        let fit: Vec<usize> = (0..images.len()).filter(|i| i % 5 < 3).collect();
        let mut centroids = vec![vec![0.0f64; images[0].data().len()]; 3];
        let mut counts = [0usize; 3];
        for &i in &fit {
            counts[labels[i]] += 1;
            for (c, &v) in centroids[labels[i]].iter_mut().zip(images[i].data()) {
                *c += v as f64;
            }
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        let held: Vec<usize> = (0..images.len()).filter(|i| i % 5 >= 3).collect();
        let correct = held
            .iter()
            .filter(|&&i| {
                let d: Vec<f64> = centroids
                    .iter()
                    .map(|c| c.iter().zip(images[i].data()).map(|(a, &b)| (a - b as f64).powi(2)).sum())
                    .collect();
                let best = (0..3).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
                best == labels[i]
            })
            .count();
        correct as f64 / held.len() as f64
    }

    #[test]
    fn classes_are_separable_by_nearest_centroid() {
        for seed in [1, 2, 3] {
            let (images, labels) = synthetic_shapes(100, 64, seed);
            let acc = nearest_centroid_accuracy(&images, &labels);
            assert!(acc >= 0.95, "seed {seed}: {acc}");
        }
    }

    #[test]
    fn writes_ingestable_tree() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_synthetic_dataset(dir.path(), 5, 32, 1).unwrap();
        assert_eq!(m.classes, vec!["disk", "square", "triangle"]);
        assert_eq!(m.counts, vec![5, 5, 5]);
    }
}
