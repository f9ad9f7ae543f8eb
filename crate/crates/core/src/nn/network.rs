use super::layers::{build, Cache, Node, Param, TrainCtx};
use super::loss::softmax_cross_entropy_grad;
use super::weights::{LayerWeights, Weights};
use crate::dataset::rng::{derive_seed, seeded, Rng};
use crate::error::{Error, Result};
use crate::modelzoo::ModelSpec;
use crate::Scalar;

const INIT_STREAM: u64 = 0x494e4954;
const DROPOUT_STREAM: u64 = 0x44524f50;

/// A trainable instance of a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: ModelSpec,
    spec_hash: String,
    nodes: Vec<Node<T>>,
    input_len: usize,
    rng: Rng,
}

fn visit_layers<T>(nodes: &mut [Node<T>], prefix: &str, f: &mut dyn FnMut(String, &mut Node<T>)) {
    for (i, node) in nodes.iter_mut().enumerate() {
        let key = if prefix.is_empty() { i.to_string() } else { format!("{prefix}.{i}") };
        match node {
            Node::Concat(cat) => {
                for (b, branch) in cat.branches.iter_mut().enumerate() {
                    visit_layers(branch, &format!("{key}.b{b}"), f);
                }
            }
            Node::Conv(_) | Node::Dense(_) | Node::BatchNorm(_) => f(key, node),
            _ => {}
        }
    }
}

fn visit_layers_ref<T>(nodes: &[Node<T>], prefix: &str, f: &mut dyn FnMut(String, &Node<T>)) {
    for (i, node) in nodes.iter().enumerate() {
        let key = if prefix.is_empty() { i.to_string() } else { format!("{prefix}.{i}") };
        match node {
            Node::Concat(cat) => {
                for (b, branch) in cat.branches.iter().enumerate() {
                    visit_layers_ref(branch, &format!("{key}.b{b}"), f);
                }
            }
            Node::Conv(_) | Node::Dense(_) | Node::BatchNorm(_) => f(key, node),
            _ => {}
        }
    }
}

fn to_f32<T: Scalar>(v: &[T]) -> Vec<f32> {
    v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)).collect()
}

fn assign<T: Scalar>(dst: &mut [T], src: &[f32], key: &str) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Shape(format!("layer {key}: expected {} values, found {}", dst.len(), src.len())));
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = T::from_f64_lossy(s as f64);
    }
    Ok(())
}

impl<T: Scalar> Network<T> {
    /// Builds the network with seeded fan-in-uniform initial weights.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut init = seeded(derive_seed(seed, INIT_STREAM));
        let (nodes, _) = build(&spec.layers, spec.input_tensor_shape(), &mut init)?;
        Ok(Self {
            spec: spec.clone(),
            spec_hash: spec.content_hash(),
            nodes,
            input_len: spec.input_tensor_shape().len(),
            rng: seeded(derive_seed(seed, DROPOUT_STREAM)),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn spec_hash(&self) -> &str {
        &self.spec_hash
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    /// Values per input sample (`h·w·c`).
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    fn check_input(&self, x: &[T], n: usize) -> Result<()> {
        if n == 0 || x.len() != n * self.input_len {
            return Err(Error::Shape(format!(
                "expected {n} samples of {} values, got {} values",
                self.input_len,
                x.len()
            )));
        }
        Ok(())
    }

    /// Class probabilities for `n` samples using running batch-norm statistics and no dropout.
    pub fn predict(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        self.check_input(x, n)?;
        Ok(self.nodes.iter().fold(x.to_vec(), |h, node| node.forward_eval(h, n)))
    }

    /// One training step's forward and backward pass.
    ///
    /// Gradients are accumulated into the parameters; returns the batch probabilities.
    pub fn forward_backward(&mut self, x: &[T], labels: &[usize]) -> Result<Vec<T>> {
        let n = labels.len();
        self.check_input(x, n)?;
        let classes = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        let mut ctx = TrainCtx { rng: &mut self.rng };
        let mut caches: Vec<Cache<T>> = Vec::with_capacity(self.nodes.len());
        let mut h = x.to_vec();
        for node in &mut self.nodes {
            let (out, cache) = node.forward_train(h, n, &mut ctx);
            h = out;
            caches.push(cache);
        }
        let probs = h;
        // The loss gradient is taken with respect to the softmax input.
        caches.pop();
        let mut grad = softmax_cross_entropy_grad(&probs, labels, classes);
        let last = self.nodes.len() - 1;
        for (i, (node, cache)) in self.nodes[..last].iter_mut().zip(caches).enumerate().rev() {
            grad = node.backward(cache, grad, n, i > 0)?;
        }
        Ok(probs)
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.grad.iter_mut().for_each(|g| *g = T::zero()));
    }

    /// Visits every trainable tensor in a fixed depth-first order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for node in &mut self.nodes {
            node.visit_params(f);
        }
    }

    pub fn parameter_count(&self) -> u64 {
        let mut total = 0u64;
        visit_layers_ref(&self.nodes, "", &mut |_, node| {
            total += match node {
                Node::Conv(c) => (c.weight.value.len() + c.bias.value.len()) as u64,
                Node::Dense(d) => (d.weight.value.len() + d.bias.value.len()) as u64,
                Node::BatchNorm(b) => 4 * b.channels as u64,
                _ => 0,
            }
        });
        total
    }

    /// Snapshot of all weights, including batch-norm running statistics.
    pub fn export_weights(&self) -> Weights {
        let mut layers = Vec::new();
        visit_layers_ref(&self.nodes, "", &mut |key, node| {
            let tensors = match node {
                Node::Conv(c) => vec![to_f32(&c.weight.value), to_f32(&c.bias.value)],
                Node::Dense(d) => vec![to_f32(&d.weight.value), to_f32(&d.bias.value)],
                Node::BatchNorm(b) => vec![
                    to_f32(&b.gamma.value),
                    to_f32(&b.beta.value),
                    to_f32(&b.running_mean),
                    to_f32(&b.running_var),
                ],
                _ => unreachable!("only parameterized layers are visited"),
            };
            layers.push(LayerWeights { key, tensors });
        });
        Weights { spec_hash: self.spec_hash.clone(), layers }
    }

    /// Loads weights produced for the same spec; keys must match one-to-one.
    pub fn import_weights(&mut self, weights: &Weights) -> Result<()> {
        if weights.spec_hash != self.spec_hash {
            return Err(Error::Shape(format!(
                "weights were produced for spec {} but the model is {}",
                weights.spec_hash, self.spec_hash
            )));
        }
        let mut seen = 0usize;
        let mut result = Ok(());
        visit_layers(&mut self.nodes, "", &mut |key, node| {
            if result.is_err() {
                return;
            }
            seen += 1;
            let Some(layer) = weights.get(&key) else {
                result = Err(Error::Shape(format!("weights missing layer {key}")));
                return;
            };
            let targets: Vec<&mut [T]> = match node {
                Node::Conv(c) => vec![&mut c.weight.value, &mut c.bias.value],
                Node::Dense(d) => vec![&mut d.weight.value, &mut d.bias.value],
                Node::BatchNorm(b) => vec![&mut b.gamma.value, &mut b.beta.value, &mut b.running_mean, &mut b.running_var],
                _ => unreachable!("only parameterized layers are visited"),
            };
            if targets.len() != layer.tensors.len() {
                result = Err(Error::Shape(format!("layer {key}: expected {} tensors", targets.len())));
                return;
            }
            for (dst, src) in targets.into_iter().zip(&layer.tensors) {
                if let Err(e) = assign(dst, src, &key) {
                    result = Err(e);
                    return;
                }
            }
        });
        result?;
        if seen != weights.layers.len() {
            return Err(Error::Shape(format!(
                "weights hold {} layers but the spec has {seen} parameterized layers",
                weights.layers.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::rng::seeded;
    use crate::modelzoo::{LayerSpec, Padding};
    use crate::nn::loss::cross_entropy;
    use rand::Rng as _;

    fn micro() -> ModelSpec {
        ModelSpec {
            name: "micro".into(),
            input_shape: (8, 8, 1),
            layers: vec![
                LayerSpec::conv(4, 3),
                LayerSpec::ReLU,
                LayerSpec::Flatten,
                LayerSpec::dense(3),
                LayerSpec::Softmax,
            ],
            num_classes: 3,
        }
    }

    fn rich() -> ModelSpec {
        let branch = |k| vec![LayerSpec::conv(2, 1), LayerSpec::BatchNorm, LayerSpec::ReLU, LayerSpec::conv(3, k)];
        ModelSpec {
            name: "rich".into(),
            input_shape: (8, 8, 2),
            layers: vec![
                LayerSpec::Conv2D { filters: 3, kernel: 3, stride: 2, padding: Padding::Valid },
                LayerSpec::BatchNorm,
                LayerSpec::ReLU,
                LayerSpec::Concat {
                    branches: vec![
                        vec![LayerSpec::conv(2, 1)],
                        branch(3),
                        vec![LayerSpec::MaxPool { size: 3, stride: 1, padding: Padding::Same }, LayerSpec::conv(2, 1)],
                    ],
                },
                LayerSpec::pool2(),
                LayerSpec::Flatten,
                LayerSpec::dense(5),
                LayerSpec::BatchNorm,
                LayerSpec::ReLU,
                LayerSpec::dense(4),
                LayerSpec::Softmax,
            ],
            num_classes: 4,
        }
    }

    fn loss(net: &mut Network<f64>, x: &[f64], labels: &[usize]) -> f64 {
        let p = net.forward_backward(x, labels).unwrap();
        net.zero_grad();
        cross_entropy(&p, labels, net.num_classes())
    }

    fn param_ptr(net: &mut Network<f64>, index: usize) -> *mut f64 {
        let mut seen = 0;
        let mut ptr = std::ptr::null_mut();
        net.visit_params(&mut |p| {
            if index >= seen && index < seen + p.value.len() {
                ptr = &mut p.value[index - seen] as *mut f64;
            }
            seen += p.value.len();
        });
        ptr
    }

    /// Largest relative error between analytic and central-difference gradients.
    fn max_gradient_error(spec: &ModelSpec, n: usize, seed: u64) -> (f64, usize) {
        let mut net = Network::<f64>::new(spec, seed).unwrap();
        let mut rng = seeded(seed ^ 0xabc);
        let x: Vec<f64> = (0..n * net.input_len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % net.num_classes()).collect();
        net.zero_grad();
        net.forward_backward(&x, &labels).unwrap();
        let mut analytic = Vec::new();
        net.visit_params(&mut |p| analytic.extend_from_slice(&p.grad));
        net.zero_grad();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let ptr = param_ptr(&mut net, i);
            // SAFETY: the pointer targets a live parameter that is not otherwise borrowed here.
            let orig = unsafe { *ptr };
            unsafe { *ptr = orig + h };
            let up = loss(&mut net, &x, &labels);
            unsafe { *ptr = orig - h };
            let down = loss(&mut net, &x, &labels);
            unsafe { *ptr = orig };
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        (worst, analytic.len())
    }

    #[test]
    fn micro_model_gradients_match_finite_differences() {
        let (err, count) = max_gradient_error(&micro(), 3, 7);
        assert_eq!(count, 4 * 10 + 257 * 3);
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn branched_model_gradients_match_finite_differences() {
        let (err, _) = max_gradient_error(&rich(), 4, 11);
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn parameter_count_matches_spec() {
        for spec in [micro(), rich()] {
            let net = Network::<f32>::new(&spec, 0).unwrap();
            assert_eq!(net.parameter_count(), spec.count_parameters().unwrap());
        }
    }

    #[test]
    fn weights_round_trip_reproduces_predictions() {
        let spec = rich();
        let mut a = Network::<f32>::new(&spec, 1).unwrap();
        let x: Vec<f32> = (0..2 * a.input_len()).map(|i| (i % 7) as f32 / 7.0).collect();
        a.forward_backward(&x, &[0, 1]).unwrap();
        let mut b = Network::<f32>::new(&spec, 2).unwrap();
        assert_ne!(a.predict(&x, 2).unwrap(), b.predict(&x, 2).unwrap());
        let bytes = a.export_weights().to_bytes();
        b.import_weights(&Weights::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(a.predict(&x, 2).unwrap(), b.predict(&x, 2).unwrap());
    }

    #[test]
    fn weights_for_another_spec_are_rejected() {
        let a = Network::<f32>::new(&micro(), 1).unwrap();
        let mut b = Network::<f32>::new(&rich(), 1).unwrap();
        assert!(b.import_weights(&a.export_weights()).is_err());
    }

    #[test]
    fn predictions_are_distributions() {
        let net = Network::<f32>::new(&rich(), 3).unwrap();
        let x = vec![0.5f32; 3 * net.input_len()];
        let p = net.predict(&x, 3).unwrap();
        for row in p.chunks(4) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn seeds_control_initialization() {
        let a = Network::<f32>::new(&micro(), 1).unwrap().export_weights();
        let b = Network::<f32>::new(&micro(), 1).unwrap().export_weights();
        let c = Network::<f32>::new(&micro(), 2).unwrap().export_weights();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let net = Network::<f32>::new(&micro(), 0).unwrap();
        assert!(matches!(net.predict(&[0.0; 10], 1), Err(Error::Shape(_))));
    }
}
