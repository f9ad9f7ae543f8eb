//! Dataset ingestion, the stratified 60/20/20 split and training-time augmentation.

mod augment;
mod manifest;
pub mod rng;
mod split;
pub mod synthetic;

pub use self::augment::{apply_affine, augment, sample_params, AffineParams, AugmentConfig};
pub use self::manifest::{DatasetManifest, Sample};
pub use self::split::{split, Split, MIN_PER_CLASS};
