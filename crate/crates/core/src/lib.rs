// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classifier;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod modelzoo;
pub mod realtime;
pub mod nn;
pub mod scalar;
pub mod trainer;

pub use classifier::Classifier;
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision network, the default for training and inference.
pub type Network = nn::Network<f32>;
/// Single-precision trained model.
pub type TrainedModel = trainer::TrainedModel<f32>;
/// Ensemble of single-precision trained models.
pub type EnsembleModel = ensemble::EnsembleModel<TrainedModel>;
