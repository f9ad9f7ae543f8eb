//! Reference architectures for 64×64 single-channel gesture crops.
//!
//! VGGNet-like follows its published layer table exactly. AlexNet-like and GoogLeNet-like were
//! only published as diagrams; the stacks below fix concrete widths that land within a few
//! percent of the reported totals (2,464,842 and 5,670,392 for ten classes).

use super::spec::{LayerSpec, ModelSpec, Padding};
use crate::error::{Error, Result};

pub const INPUT_SHAPE: (usize, usize, usize) = (64, 64, 1);
pub const DROPOUT: f64 = 0.2;

/// Reported totals for ten classes, used as reference targets.
pub const REPORTED_VGGNET_LIKE: u64 = 12_107_466;
pub const REPORTED_ALEXNET_LIKE: u64 = 2_464_842;
pub const REPORTED_GOOGLENET_LIKE: u64 = 5_670_392;
pub const REPORTED_BASIC_CNN: u64 = 198_474;
pub const REPORTED_ENSEMBLE: u64 = 20_242_700;

/// conv → BN → ReLU
fn conv_bn_relu(filters: usize, kernel: usize) -> [LayerSpec; 3] {
    [LayerSpec::conv(filters, kernel), LayerSpec::BatchNorm, LayerSpec::ReLU]
}

fn head(layers: &mut Vec<LayerSpec>, num_classes: usize) {
    layers.push(LayerSpec::dense(num_classes));
    layers.push(LayerSpec::Softmax);
}

fn finish(name: &str, layers: Vec<LayerSpec>, num_classes: usize) -> Result<ModelSpec> {
    if num_classes < 2 {
        return Err(Error::Parameter(format!("{name}: need at least 2 classes, got {num_classes}")));
    }
    let spec = ModelSpec { name: name.to_string(), input_shape: INPUT_SHAPE, layers, num_classes };
    spec.validate()?;
    Ok(spec)
}

pub fn vggnet_like(num_classes: usize) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for (filters, convs) in [(64, 2), (128, 2), (256, 3), (512, 3)] {
        for _ in 0..convs {
            layers.extend(conv_bn_relu(filters, 3));
        }
        layers.push(LayerSpec::pool2());
    }
    layers.push(LayerSpec::Flatten);
    for _ in 0..2 {
        layers.extend([LayerSpec::dense(512), LayerSpec::ReLU, LayerSpec::dropout(DROPOUT)]);
    }
    head(&mut layers, num_classes);
    finish("vggnet_like", layers, num_classes)
}

pub fn alexnet_like(num_classes: usize) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for (filters, kernel) in [(32, 5), (64, 3), (128, 3), (256, 3), (256, 3)] {
        layers.extend(conv_bn_relu(filters, kernel));
        layers.push(LayerSpec::pool2());
    }
    layers.push(LayerSpec::Flatten);
    for units in [1024, 512] {
        layers.extend([LayerSpec::dense(units), LayerSpec::ReLU, LayerSpec::dropout(DROPOUT)]);
    }
    head(&mut layers, num_classes);
    finish("alexnet_like", layers, num_classes)
}

/// Widths of one inception block: 1×1, (reduce → 3×3), (reduce → 5×5), (pool → 1×1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InceptionWidths {
    pub conv1: usize,
    pub reduce3: usize,
    pub conv3: usize,
    pub reduce5: usize,
    pub conv5: usize,
    pub pool_proj: usize,
}

impl InceptionWidths {
    pub const fn new(conv1: usize, reduce3: usize, conv3: usize, reduce5: usize, conv5: usize, pool_proj: usize) -> Self {
        Self { conv1, reduce3, conv3, reduce5, conv5, pool_proj }
    }

    pub fn output_channels(&self) -> usize {
        self.conv1 + self.conv3 + self.conv5 + self.pool_proj
    }
}

pub fn inception(w: InceptionWidths) -> LayerSpec {
    let cat = |parts: &[[LayerSpec; 3]]| parts.iter().flat_map(|p| p.iter().cloned()).collect::<Vec<_>>();
    let pool = LayerSpec::MaxPool { size: 3, stride: 1, padding: Padding::Same };
    let mut pooled = vec![pool];
    pooled.extend(conv_bn_relu(w.pool_proj, 1));
    LayerSpec::Concat {
        branches: vec![
            cat(&[conv_bn_relu(w.conv1, 1)]),
            cat(&[conv_bn_relu(w.reduce3, 1), conv_bn_relu(w.conv3, 3)]),
            cat(&[conv_bn_relu(w.reduce5, 1), conv_bn_relu(w.conv5, 5)]),
            pooled,
        ],
    }
}

pub const GOOGLENET_BLOCKS: [[InceptionWidths; 2]; 3] = [
    [InceptionWidths::new(64, 96, 128, 16, 32, 32), InceptionWidths::new(128, 128, 192, 32, 96, 64)],
    [InceptionWidths::new(192, 96, 208, 16, 48, 64), InceptionWidths::new(256, 160, 320, 32, 128, 128)],
    [InceptionWidths::new(256, 160, 320, 32, 128, 128), InceptionWidths::new(448, 320, 576, 64, 128, 128)],
];

pub fn googlenet_like(num_classes: usize) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for filters in [64, 128] {
        layers.extend(conv_bn_relu(filters, 3));
        layers.push(LayerSpec::pool2());
    }
    for stage in GOOGLENET_BLOCKS {
        for block in stage {
            layers.push(inception(block));
        }
        layers.push(LayerSpec::pool2());
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::dropout(DROPOUT));
    head(&mut layers, num_classes);
    finish("googlenet_like", layers, num_classes)
}

/// Small three-block baseline.
pub fn basic_cnn(num_classes: usize) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for filters in [32, 64, 64] {
        layers.extend([LayerSpec::conv(filters, 3), LayerSpec::ReLU, LayerSpec::pool2()]);
    }
    layers.extend([LayerSpec::Flatten, LayerSpec::dense(32), LayerSpec::ReLU, LayerSpec::dropout(DROPOUT)]);
    head(&mut layers, num_classes);
    finish("basic_cnn", layers, num_classes)
}

/// The three ensemble members, in ensemble order.
pub const MEMBER_NAMES: [&str; 3] = ["vggnet_like", "alexnet_like", "googlenet_like"];

/// Looks an architecture up by name (`vgg`, `alexnet`, `googlenet`, `basic` are accepted too).
pub fn by_name(name: &str, num_classes: usize) -> Result<ModelSpec> {
    match name.to_ascii_lowercase().as_str() {
        "vggnet_like" | "vgg" | "vggnet" => vggnet_like(num_classes),
        "alexnet_like" | "alexnet" | "alex" => alexnet_like(num_classes),
        "googlenet_like" | "googlenet" | "inception" => googlenet_like(num_classes),
        "basic_cnn" | "basic" => basic_cnn(num_classes),
        other => Err(Error::Parameter(format!("unknown architecture {other:?}"))),
    }
}
