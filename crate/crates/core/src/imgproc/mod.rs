//! Deterministic image operations for hand segmentation: grayscale conversion, thresholding,
//! background subtraction, contours, distance transform, palm localization, cropping, median
//! filtering and resizing.
//!
//! Everything here is a pure function of its inputs except [`BackgroundModel`], which is
//! updated by a single owner per stream.

mod background;
mod contour;
mod distance;
mod filter;
mod image;
pub mod io;
mod palm;
mod pipeline;
mod resize;
mod threshold;

pub use self::background::BackgroundModel;
pub use self::contour::{component_mask, extract_contours, label_components, largest_contour, BBox, Contour, Point};
pub use self::distance::{distance_transform, DistanceMap};
pub use self::filter::median_filter;
pub use self::image::{to_grayscale, BinaryMask, GrayImage, Raster, RgbImage};
pub use self::palm::{crop_hand, crop_side, palm_geometry, PalmGeometry};
pub use self::pipeline::{extract_hand, preprocess_gray, FilterOrder, HandRegion, PreprocessConfig};
pub use self::resize::{resize, Resize};
pub use self::threshold::{histogram, otsu_threshold, threshold_binary, Threshold};
