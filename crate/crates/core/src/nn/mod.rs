//! Minimal CPU neural-network engine for the layer set used by the model zoo.

mod layers;
pub mod loss;
mod network;
pub mod ops;
pub mod weights;

pub use layers::{Param, BN_EPSILON, BN_MOMENTUM};
pub use loss::{argmax, cross_entropy, softmax};
pub use network::Network;
pub use weights::{LayerWeights, Weights};
