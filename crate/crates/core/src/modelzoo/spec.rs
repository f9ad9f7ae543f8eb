//! Declarative layer graphs with shape inference and parameter counting.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Padding {
    /// Output spatial size `ceil(in / stride)`.
    #[default]
    Same,
    /// No padding: `floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LayerSpec {
    Conv2D { filters: usize, kernel: usize, stride: usize, padding: Padding },
    BatchNorm,
    ReLU,
    MaxPool {
        size: usize,
        stride: usize,
        #[serde(default = "valid")]
        padding: Padding,
    },
    Dense { units: usize },
    Flatten,
    Dropout { rate: f64 },
    Softmax,
    /// Parallel branches over the same input, concatenated along channels.
    Concat { branches: Vec<Vec<LayerSpec>> },
}

fn valid() -> Padding {
    Padding::Valid
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel: usize) -> Self {
        LayerSpec::Conv2D { filters, kernel, stride: 1, padding: Padding::Same }
    }

    pub fn pool2() -> Self {
        LayerSpec::MaxPool { size: 2, stride: 2, padding: Padding::Valid }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D { .. } => "Conv2D",
            LayerSpec::BatchNorm => "BatchNorm",
            LayerSpec::ReLU => "ReLU",
            LayerSpec::MaxPool { .. } => "MaxPool",
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Softmax => "Softmax",
            LayerSpec::Concat { .. } => "Concat",
        }
    }

    /// Whether the layer owns tensors (weights or normalization statistics).
    pub fn has_parameters(&self) -> bool {
        matches!(self, LayerSpec::Conv2D { .. } | LayerSpec::BatchNorm | LayerSpec::Dense { .. })
    }
}

/// Activation shape for a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl TensorShape {
    pub fn len(&self) -> usize {
        match *self {
            TensorShape::Spatial { h, w, c } => h * w * c,
            TensorShape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel count (features for flat tensors).
    pub fn channels(&self) -> usize {
        match *self {
            TensorShape::Spatial { c, .. } => c,
            TensorShape::Flat(n) => n,
        }
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorShape::Spatial { h, w, c } => write!(f, "{h}x{w}x{c}"),
            TensorShape::Flat(n) => write!(f, "{n}"),
        }
    }
}

fn out_dim(input: usize, k: usize, stride: usize, padding: Padding) -> Result<usize> {
    match padding {
        Padding::Same => Ok(input.div_ceil(stride)),
        Padding::Valid if input >= k => Ok((input - k) / stride + 1),
        Padding::Valid => Err(Error::Shape(format!("window {k} larger than input {input}"))),
    }
}

/// Leading padding (TensorFlow convention: the extra pixel goes after).
pub fn same_padding(input: usize, k: usize, stride: usize) -> usize {
    let out = input.div_ceil(stride);
    ((out - 1) * stride + k).saturating_sub(input) / 2
}

/// Output shape and parameter count of one layer.
pub fn layer_output(layer: &LayerSpec, input: TensorShape) -> Result<(TensorShape, u64)> {
    use LayerSpec::*;
    let spatial = |what: &str| -> Result<(usize, usize, usize)> {
        match input {
            TensorShape::Spatial { h, w, c } => Ok((h, w, c)),
            TensorShape::Flat(_) => Err(Error::Shape(format!("{what} needs a spatial input, got {input}"))),
        }
    };
    Ok(match layer {
        Conv2D { filters, kernel, stride, padding } => {
            if *filters == 0 || *kernel == 0 || *stride == 0 {
                return Err(Error::Shape("conv sizes must be positive".into()));
            }
            let (h, w, c) = spatial("Conv2D")?;
            let shape = TensorShape::Spatial {
                h: out_dim(h, *kernel, *stride, *padding)?,
                w: out_dim(w, *kernel, *stride, *padding)?,
                c: *filters,
            };
            (shape, ((kernel * kernel * c + 1) * filters) as u64)
        }
        BatchNorm => (input, 4 * input.channels() as u64),
        ReLU | Dropout { .. } => {
            if let Dropout { rate } = layer {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::Shape(format!("dropout rate {rate} outside [0, 1)")));
                }
            }
            (input, 0)
        }
        MaxPool { size, stride, padding } => {
            if *size == 0 || *stride == 0 {
                return Err(Error::Shape("pool sizes must be positive".into()));
            }
            let (h, w, c) = spatial("MaxPool")?;
            let shape = TensorShape::Spatial {
                h: out_dim(h, *size, *stride, *padding)?,
                w: out_dim(w, *size, *stride, *padding)?,
                c,
            };
            (shape, 0)
        }
        Dense { units } => match input {
            TensorShape::Flat(n) if *units > 0 => (TensorShape::Flat(*units), ((n + 1) * units) as u64),
            TensorShape::Flat(_) => return Err(Error::Shape("dense units must be positive".into())),
            TensorShape::Spatial { .. } => {
                return Err(Error::Shape(format!("Dense needs a flat input, got {input} (add Flatten)")))
            }
        },
        Flatten => (TensorShape::Flat(input.len()), 0),
        Softmax => match input {
            TensorShape::Flat(_) => (input, 0),
            _ => return Err(Error::Shape(format!("Softmax needs a flat input, got {input}"))),
        },
        Concat { branches } => {
            if branches.is_empty() {
                return Err(Error::Shape("Concat without branches".into()));
            }
            let (h, w, _) = spatial("Concat")?;
            let mut channels = 0;
            let mut params = 0;
            for (i, branch) in branches.iter().enumerate() {
                let (shape, p) = sequence_output(branch, input)?;
                match shape {
                    TensorShape::Spatial { h: bh, w: bw, c } if (bh, bw) == (h, w) => channels += c,
                    other => {
                        return Err(Error::Shape(format!(
                            "Concat branch {i} produces {other}, expected {h}x{w}xC"
                        )))
                    }
                }
                params += p;
            }
            (TensorShape::Spatial { h, w, c: channels }, params)
        }
    })
}

/// Output shape and total parameters of a layer sequence.
pub fn sequence_output(layers: &[LayerSpec], input: TensorShape) -> Result<(TensorShape, u64)> {
    layers.iter().try_fold((input, 0u64), |(shape, total), l| {
        let (s, p) = layer_output(l, shape)?;
        Ok((s, total + p))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// (height, width, channels)
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

/// One row of a layer table; nested branch layers carry a dotted path.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSummary {
    pub path: String,
    pub kind: &'static str,
    pub output: TensorShape,
    pub parameters: u64,
}

impl ModelSpec {
    pub fn input_tensor_shape(&self) -> TensorShape {
        let (h, w, c) = self.input_shape;
        TensorShape::Spatial { h, w, c }
    }

    /// Output shape after every top-level layer.
    pub fn infer_shapes(&self) -> Result<Vec<TensorShape>> {
        let mut shape = self.input_tensor_shape();
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                shape = layer_output(l, shape).map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", l.kind())))?.0;
                Ok(shape)
            })
            .collect()
    }

    pub fn count_parameters(&self) -> Result<u64> {
        Ok(sequence_output(&self.layers, self.input_tensor_shape())?.1)
    }

    /// Flattened table of every layer including branch contents.
    pub fn summary(&self) -> Result<Vec<LayerSummary>> {
        fn walk(layers: &[LayerSpec], mut shape: TensorShape, prefix: &str, out: &mut Vec<LayerSummary>) -> Result<TensorShape> {
            for (i, l) in layers.iter().enumerate() {
                let path = if prefix.is_empty() { i.to_string() } else { format!("{prefix}.{i}") };
                let (next, params) = layer_output(l, shape)?;
                out.push(LayerSummary { path: path.clone(), kind: l.kind(), output: next, parameters: params });
                if let LayerSpec::Concat { branches } = l {
                    for (b, branch) in branches.iter().enumerate() {
                        walk(branch, shape, &format!("{path}.b{b}"), out)?;
                    }
                }
                shape = next;
            }
            Ok(shape)
        }
        let mut out = Vec::new();
        walk(&self.layers, self.input_tensor_shape(), "", &mut out)?;
        Ok(out)
    }

    /// Checks shapes end to end and the `Dense{num_classes}, Softmax` head.
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Shape(format!("{} classes; need at least 2", self.num_classes)));
        }
        let n = self.layers.len();
        let head_ok = n >= 2
            && self.layers[n - 1] == LayerSpec::Softmax
            && self.layers[n - 2] == LayerSpec::Dense { units: self.num_classes };
        if !head_ok {
            return Err(Error::Shape("model must end with Dense{num_classes} followed by Softmax".into()));
        }
        let shapes = self.infer_shapes()?;
        if shapes.last() != Some(&TensorShape::Flat(self.num_classes)) {
            return Err(Error::Shape("output is not a class vector".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 of the compact JSON encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
