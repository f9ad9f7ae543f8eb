//! Architecture definitions, shape inference and exact parameter counting.

mod spec;
mod zoo;

pub use self::spec::{
    layer_output, same_padding, sequence_output, LayerSpec, LayerSummary, ModelSpec, Padding, TensorShape,
};
pub use self::zoo::*;
