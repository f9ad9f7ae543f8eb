//! Runtime layers with forward and backward passes.
//!
//! Activations are batches laid out sample-major; spatial samples are stored CHW.

use rand::Rng as _;

use super::ops::{col2im, im2col, max_pool, Window};
use crate::dataset::rng::Rng;
use crate::error::{Error, Result};
use crate::modelzoo::{layer_output, same_padding, LayerSpec, Padding, TensorShape};
use crate::Scalar;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPSILON: f64 = 1e-5;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn new(value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Self { value, grad }
    }

    fn zeros(n: usize) -> Self {
        Self::new(vec![T::zero(); n])
    }

    /// Uniform in `±sqrt(6 / fan_in)`.
    fn fan_in_uniform(n: usize, fan_in: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / fan_in as f64).sqrt();
        Self::new((0..n).map(|_| T::from_f64_lossy(rng.gen_range(-limit..limit))).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub geom: Window,
    pub filters: usize,
    /// `filters × (channels·k·k)`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub channels: usize,
    /// Values per channel in one sample (h·w, or 1 for flat inputs).
    pub positions: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub inputs: usize,
    pub units: usize,
    /// `units × inputs`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

#[derive(Debug, Clone)]
pub struct Concat<T> {
    pub branches: Vec<Vec<Node<T>>>,
    /// Output channels of each branch.
    pub channels: Vec<usize>,
    pub positions: usize,
    pub input_len: usize,
}

#[derive(Debug, Clone)]
pub enum Node<T> {
    Conv(Conv<T>),
    BatchNorm(BatchNorm<T>),
    ReLU,
    MaxPool(Window),
    Dense(Dense<T>),
    Flatten,
    Dropout(f64),
    Softmax,
    Concat(Concat<T>),
}

/// What a training forward pass keeps for the backward pass.
#[derive(Debug)]
pub enum Cache<T> {
    Empty,
    Input(Vec<T>),
    Norm { xhat: Vec<T>, inv_std: Vec<T> },
    Mask(Vec<bool>),
    Argmax(Vec<u32>),
    Scale(Vec<T>),
    Output(Vec<T>),
    Branches(Vec<Vec<Cache<T>>>),
}

fn window(input: TensorShape, out: TensorShape, k: usize, stride: usize, padding: Padding) -> Window {
    let (TensorShape::Spatial { h, w, c }, TensorShape::Spatial { h: h_out, w: w_out, .. }) = (input, out) else {
        unreachable!("spatial shapes were checked by shape inference")
    };
    let (pad_top, pad_left) = match padding {
        Padding::Same => (same_padding(h, k, stride), same_padding(w, k, stride)),
        Padding::Valid => (0, 0),
    };
    Window { channels: c, h_in: h, w_in: w, k, stride, pad_top, pad_left, h_out, w_out }
}

/// Instantiates runtime layers for a layer sequence, drawing initial weights from `rng`.
pub fn build<T: Scalar>(layers: &[LayerSpec], mut shape: TensorShape, rng: &mut Rng) -> Result<(Vec<Node<T>>, TensorShape)> {
    let mut nodes = Vec::with_capacity(layers.len());
    for layer in layers {
        let (out, _) = layer_output(layer, shape)?;
        let node = match layer {
            LayerSpec::Conv2D { filters, kernel, stride, padding } => {
                let geom = window(shape, out, *kernel, *stride, *padding);
                let fan_in = geom.patch_len();
                Node::Conv(Conv {
                    geom,
                    filters: *filters,
                    weight: Param::fan_in_uniform(filters * fan_in, fan_in, rng),
                    bias: Param::zeros(*filters),
                })
            }
            LayerSpec::BatchNorm => {
                let (channels, positions) = match shape {
                    TensorShape::Spatial { h, w, c } => (c, h * w),
                    TensorShape::Flat(n) => (n, 1),
                };
                Node::BatchNorm(BatchNorm {
                    channels,
                    positions,
                    gamma: Param::new(vec![T::one(); channels]),
                    beta: Param::zeros(channels),
                    running_mean: vec![T::zero(); channels],
                    running_var: vec![T::one(); channels],
                })
            }
            LayerSpec::ReLU => Node::ReLU,
            LayerSpec::MaxPool { size, stride, padding } => Node::MaxPool(window(shape, out, *size, *stride, *padding)),
            LayerSpec::Dense { units } => {
                let inputs = shape.len();
                Node::Dense(Dense {
                    inputs,
                    units: *units,
                    weight: Param::fan_in_uniform(units * inputs, inputs, rng),
                    bias: Param::zeros(*units),
                })
            }
            LayerSpec::Flatten => Node::Flatten,
            LayerSpec::Dropout { rate } => Node::Dropout(*rate),
            LayerSpec::Softmax => Node::Softmax,
            LayerSpec::Concat { branches } => {
                let mut built = Vec::with_capacity(branches.len());
                let mut channels = Vec::with_capacity(branches.len());
                for b in branches {
                    let (nodes, bshape) = build(b, shape, rng)?;
                    built.push(nodes);
                    channels.push(bshape.channels());
                }
                let TensorShape::Spatial { h, w, .. } = out else { unreachable!() };
                Node::Concat(Concat { branches: built, channels, positions: h * w, input_len: shape.len() })
            }
        };
        nodes.push(node);
        shape = out;
    }
    Ok((nodes, shape))
}

fn softmax_rows<T: Scalar>(x: &mut [T], width: usize) {
    for row in x.chunks_mut(width) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl<T: Scalar> Conv<T> {
    fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        let g = &self.geom;
        let (kk, p, f) = (g.patch_len(), g.positions(), self.filters);
        let mut out = vec![T::zero(); n * f * p];
        let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); kk * p] };
        for s in 0..n {
            let xs = &x[s * g.input_len()..(s + 1) * g.input_len()];
            let cols: &[T] = if g.is_pointwise() {
                xs
            } else {
                im2col(xs, g, &mut col);
                &col
            };
            let os = &mut out[s * f * p..(s + 1) * f * p];
            for (fi, chunk) in os.chunks_mut(p).enumerate() {
                chunk.fill(self.bias.value[fi]);
            }
            T::gemm(f, kk, p, T::one(), &self.weight.value, (kk as isize, 1), cols, (p as isize, 1), T::one(), os, (p as isize, 1));
        }
        out
    }

    fn backward(&mut self, x: &[T], grad: &[T], n: usize, need_dx: bool) -> Vec<T> {
        let g = self.geom;
        let (kk, p, f) = (g.patch_len(), g.positions(), self.filters);
        let mut dx = if need_dx { vec![T::zero(); n * g.input_len()] } else { Vec::new() };
        let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); kk * p] };
        let mut dcol = if need_dx && !g.is_pointwise() { vec![T::zero(); kk * p] } else { Vec::new() };
        for s in 0..n {
            let xs = &x[s * g.input_len()..(s + 1) * g.input_len()];
            let cols: &[T] = if g.is_pointwise() {
                xs
            } else {
                im2col(xs, &g, &mut col);
                &col
            };
            let gy = &grad[s * f * p..(s + 1) * f * p];
            T::gemm(f, p, kk, T::one(), gy, (p as isize, 1), cols, (1, p as isize), T::one(), &mut self.weight.grad, (kk as isize, 1));
            for (fi, chunk) in gy.chunks(p).enumerate() {
                self.bias.grad[fi] += chunk.iter().copied().sum::<T>();
            }
            if need_dx {
                let dxs = &mut dx[s * g.input_len()..(s + 1) * g.input_len()];
                let target: &mut [T] = if g.is_pointwise() { dxs } else { &mut dcol };
                T::gemm(kk, f, p, T::one(), &self.weight.value, (1, kk as isize), gy, (p as isize, 1), T::zero(), target, (p as isize, 1));
                if !g.is_pointwise() {
                    col2im(&dcol, &g, &mut dx[s * g.input_len()..(s + 1) * g.input_len()]);
                }
            }
        }
        dx
    }
}

impl<T: Scalar> Dense<T> {
    fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        let (i, u) = (self.inputs, self.units);
        let mut out = Vec::with_capacity(n * u);
        for _ in 0..n {
            out.extend_from_slice(&self.bias.value);
        }
        T::gemm(n, i, u, T::one(), x, (i as isize, 1), &self.weight.value, (1, i as isize), T::one(), &mut out, (u as isize, 1));
        out
    }

    fn backward(&mut self, x: &[T], grad: &[T], n: usize, need_dx: bool) -> Vec<T> {
        let (i, u) = (self.inputs, self.units);
        T::gemm(u, n, i, T::one(), grad, (1, u as isize), x, (i as isize, 1), T::one(), &mut self.weight.grad, (i as isize, 1));
        for row in grad.chunks(u) {
            for (b, &g) in self.bias.grad.iter_mut().zip(row) {
                *b += g;
            }
        }
        if !need_dx {
            return Vec::new();
        }
        let mut dx = vec![T::zero(); n * i];
        T::gemm(n, u, i, T::one(), grad, (u as isize, 1), &self.weight.value, (i as isize, 1), T::zero(), &mut dx, (i as isize, 1));
        dx
    }
}

impl<T: Scalar> BatchNorm<T> {
    fn index(&self, s: usize, c: usize) -> std::ops::Range<usize> {
        let start = (s * self.channels + c) * self.positions;
        start..start + self.positions
    }

    fn forward_train(&mut self, mut x: Vec<T>, n: usize) -> (Vec<T>, Cache<T>) {
        let m = (n * self.positions) as f64;
        let eps = T::from_f64_lossy(BN_EPSILON);
        let mom = T::from_f64_lossy(BN_MOMENTUM);
        let mut inv_std = vec![T::zero(); self.channels];
        let mut xhat = vec![T::zero(); x.len()];
        for c in 0..self.channels {
            let mut sum = T::zero();
            for s in 0..n {
                sum += x[self.index(s, c)].iter().copied().sum::<T>();
            }
            let mean = sum / T::from_f64_lossy(m);
            let mut sq = T::zero();
            for s in 0..n {
                for &v in &x[self.index(s, c)] {
                    sq += (v - mean) * (v - mean);
                }
            }
            let var = sq / T::from_f64_lossy(m);
            let inv = (var + eps).sqrt().recip();
            inv_std[c] = inv;
            let (gamma, beta) = (self.gamma.value[c], self.beta.value[c]);
            for s in 0..n {
                let r = self.index(s, c);
                for (xv, xh) in x[r.clone()].iter_mut().zip(&mut xhat[r]) {
                    *xh = (*xv - mean) * inv;
                    *xv = gamma * *xh + beta;
                }
            }
            let unbiased = if m > 1.0 { var * T::from_f64_lossy(m / (m - 1.0)) } else { var };
            self.running_mean[c] = mom * self.running_mean[c] + (T::one() - mom) * mean;
            self.running_var[c] = mom * self.running_var[c] + (T::one() - mom) * unbiased;
        }
        (x, Cache::Norm { xhat, inv_std })
    }

    fn forward_eval(&self, mut x: Vec<T>, n: usize) -> Vec<T> {
        let eps = T::from_f64_lossy(BN_EPSILON);
        for c in 0..self.channels {
            let inv = (self.running_var[c] + eps).sqrt().recip();
            let scale = self.gamma.value[c] * inv;
            let shift = self.beta.value[c] - self.running_mean[c] * scale;
            for s in 0..n {
                for v in &mut x[self.index(s, c)] {
                    *v = *v * scale + shift;
                }
            }
        }
        x
    }

    fn backward(&mut self, xhat: &[T], inv_std: &[T], mut grad: Vec<T>, n: usize) -> Vec<T> {
        let m = T::from_f64_lossy((n * self.positions) as f64);
        for c in 0..self.channels {
            let (mut sum_dy, mut sum_dy_xhat) = (T::zero(), T::zero());
            for s in 0..n {
                let r = self.index(s, c);
                for (&g, &xh) in grad[r.clone()].iter().zip(&xhat[r]) {
                    sum_dy += g;
                    sum_dy_xhat += g * xh;
                }
            }
            self.gamma.grad[c] += sum_dy_xhat;
            self.beta.grad[c] += sum_dy;
            let k = self.gamma.value[c] * inv_std[c] / m;
            for s in 0..n {
                let r = self.index(s, c);
                for (g, &xh) in grad[r.clone()].iter_mut().zip(&xhat[r]) {
                    *g = k * (m * *g - sum_dy - xh * sum_dy_xhat);
                }
            }
        }
        grad
    }
}

impl<T: Scalar> Concat<T> {
    fn merge(&self, outputs: Vec<Vec<T>>, n: usize) -> Vec<T> {
        let total: usize = self.channels.iter().sum();
        let p = self.positions;
        let mut out = Vec::with_capacity(n * total * p);
        for s in 0..n {
            for (o, &c) in outputs.iter().zip(&self.channels) {
                out.extend_from_slice(&o[s * c * p..(s + 1) * c * p]);
            }
        }
        out
    }

    fn split(&self, grad: &[T], n: usize) -> Vec<Vec<T>> {
        let total: usize = self.channels.iter().sum();
        let p = self.positions;
        let mut parts: Vec<Vec<T>> = self.channels.iter().map(|&c| Vec::with_capacity(n * c * p)).collect();
        for s in 0..n {
            let mut offset = s * total * p;
            for (part, &c) in parts.iter_mut().zip(&self.channels) {
                part.extend_from_slice(&grad[offset..offset + c * p]);
                offset += c * p;
            }
        }
        parts
    }
}

/// Mutable training-time context.
pub struct TrainCtx<'a> {
    pub rng: &'a mut Rng,
}

impl<T: Scalar> Node<T> {
    pub fn forward_train(&mut self, x: Vec<T>, n: usize, ctx: &mut TrainCtx<'_>) -> (Vec<T>, Cache<T>) {
        match self {
            Node::Conv(conv) => {
                let out = conv.forward(&x, n);
                (out, Cache::Input(x))
            }
            Node::Dense(d) => {
                let out = d.forward(&x, n);
                (out, Cache::Input(x))
            }
            Node::BatchNorm(bn) => bn.forward_train(x, n),
            Node::ReLU => {
                let mask: Vec<bool> = x.iter().map(|&v| v > T::zero()).collect();
                let out = x.into_iter().map(|v| if v > T::zero() { v } else { T::zero() }).collect();
                (out, Cache::Mask(mask))
            }
            Node::MaxPool(g) => {
                let (il, ol) = (g.input_len(), g.channels * g.positions());
                let mut out = vec![T::zero(); n * ol];
                let mut arg = vec![0u32; n * ol];
                for s in 0..n {
                    max_pool(&x[s * il..(s + 1) * il], g, &mut out[s * ol..(s + 1) * ol], &mut arg[s * ol..(s + 1) * ol]);
                }
                (out, Cache::Argmax(arg))
            }
            Node::Flatten => (x, Cache::Empty),
            Node::Dropout(rate) => {
                if *rate == 0.0 {
                    return (x, Cache::Empty);
                }
                let keep = 1.0 - *rate;
                let scale = T::from_f64_lossy(1.0 / keep);
                let mask: Vec<T> = (0..x.len()).map(|_| if ctx.rng.gen_bool(keep) { scale } else { T::zero() }).collect();
                let out = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                (out, Cache::Scale(mask))
            }
            Node::Softmax => {
                let width = x.len() / n.max(1);
                let mut out = x;
                softmax_rows(&mut out, width);
                let cache = Cache::Output(out.clone());
                (out, cache)
            }
            Node::Concat(cat) => {
                let mut outputs = Vec::with_capacity(cat.branches.len());
                let mut caches = Vec::with_capacity(cat.branches.len());
                let last = cat.branches.len() - 1;
                let mut input = Some(x);
                for (i, branch) in cat.branches.iter_mut().enumerate() {
                    let mut h = if i == last { input.take().expect("input consumed once") } else { input.clone().expect("input present") };
                    let mut bc = Vec::with_capacity(branch.len());
                    for node in branch.iter_mut() {
                        let (o, c) = node.forward_train(h, n, ctx);
                        h = o;
                        bc.push(c);
                    }
                    outputs.push(h);
                    caches.push(bc);
                }
                (cat.merge(outputs, n), Cache::Branches(caches))
            }
        }
    }

    pub fn forward_eval(&self, x: Vec<T>, n: usize) -> Vec<T> {
        match self {
            Node::Conv(conv) => conv.forward(&x, n),
            Node::Dense(d) => d.forward(&x, n),
            Node::BatchNorm(bn) => bn.forward_eval(x, n),
            Node::ReLU => x.into_iter().map(|v| if v > T::zero() { v } else { T::zero() }).collect(),
            Node::MaxPool(g) => {
                let (il, ol) = (g.input_len(), g.channels * g.positions());
                let mut out = vec![T::zero(); n * ol];
                let mut arg = vec![0u32; ol];
                for s in 0..n {
                    max_pool(&x[s * il..(s + 1) * il], g, &mut out[s * ol..(s + 1) * ol], &mut arg);
                }
                out
            }
            Node::Flatten | Node::Dropout(_) => x,
            Node::Softmax => {
                let width = x.len() / n.max(1);
                let mut out = x;
                softmax_rows(&mut out, width);
                out
            }
            Node::Concat(cat) => {
                let outputs = cat
                    .branches
                    .iter()
                    .map(|branch| branch.iter().fold(x.clone(), |h, node| node.forward_eval(h, n)))
                    .collect();
                cat.merge(outputs, n)
            }
        }
    }

    /// Accumulates parameter gradients and returns the gradient with respect to the input
    /// (empty when `need_dx` is false and the layer can skip it).
    pub fn backward(&mut self, cache: Cache<T>, grad: Vec<T>, n: usize, need_dx: bool) -> Result<Vec<T>> {
        let mismatch = || Error::Shape("backward cache does not match layer".into());
        Ok(match (self, cache) {
            (Node::Conv(conv), Cache::Input(x)) => conv.backward(&x, &grad, n, need_dx),
            (Node::Dense(d), Cache::Input(x)) => d.backward(&x, &grad, n, need_dx),
            (Node::BatchNorm(bn), Cache::Norm { xhat, inv_std }) => bn.backward(&xhat, &inv_std, grad, n),
            (Node::ReLU, Cache::Mask(mask)) => {
                grad.into_iter().zip(mask).map(|(g, m)| if m { g } else { T::zero() }).collect()
            }
            (Node::MaxPool(g), Cache::Argmax(arg)) => {
                let (il, ol) = (g.input_len(), g.channels * g.positions());
                let mut dx = vec![T::zero(); n * il];
                for s in 0..n {
                    for o in 0..ol {
                        dx[s * il + arg[s * ol + o] as usize] += grad[s * ol + o];
                    }
                }
                dx
            }
            (Node::Flatten, Cache::Empty) | (Node::Dropout(_), Cache::Empty) => grad,
            (Node::Dropout(_), Cache::Scale(mask)) => grad.into_iter().zip(mask).map(|(g, m)| g * m).collect(),
            (Node::Softmax, Cache::Output(y)) => {
                let width = y.len() / n.max(1);
                let mut dx = grad;
                for (gr, yr) in dx.chunks_mut(width).zip(y.chunks(width)) {
                    let dot: T = gr.iter().zip(yr).map(|(&g, &p)| g * p).sum();
                    for (g, &p) in gr.iter_mut().zip(yr) {
                        *g = p * (*g - dot);
                    }
                }
                dx
            }
            (Node::Concat(cat), Cache::Branches(caches)) => {
                let parts = cat.split(&grad, n);
                let mut dx = if need_dx { vec![T::zero(); n * cat.input_len] } else { Vec::new() };
                for ((branch, bc), part) in cat.branches.iter_mut().zip(caches).zip(parts) {
                    let mut g = part;
                    let depth = branch.len();
                    for (i, (node, c)) in branch.iter_mut().zip(bc).enumerate().rev() {
                        let _ = depth;
                        g = node.backward(c, g, n, need_dx || i > 0)?;
                    }
                    if need_dx {
                        for (d, v) in dx.iter_mut().zip(g) {
                            *d += v;
                        }
                    }
                }
                dx
            }
            _ => return Err(mismatch()),
        })
    }

    /// Visits trainable tensors depth-first in layer order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        match self {
            Node::Conv(c) => {
                f(&mut c.weight);
                f(&mut c.bias);
            }
            Node::Dense(d) => {
                f(&mut d.weight);
                f(&mut d.bias);
            }
            Node::BatchNorm(bn) => {
                f(&mut bn.gamma);
                f(&mut bn.beta);
            }
            Node::Concat(cat) => {
                for branch in &mut cat.branches {
                    for node in branch {
                        node.visit_params(f);
                    }
                }
            }
            _ => {}
        }
    }
}
