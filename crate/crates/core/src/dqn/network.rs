use rand::Rng;

use super::scalar::{gemm, Scalar, View};
use crate::error::DqnError;

/// Affine layer `y = W·x + b`. `weights` holds `Wᵀ` row-major (`inputs × outputs`,
/// entry `i·outputs + o` links input `i` to output `o`), which keeps the
/// forward GEMM operand contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            biases: vec![T::zero(); outputs],
        }
    }

    /// Uniform in ±1/√fan_in for weights and biases.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || T::from_f64_lossy(rng.gen_range(-bound..=bound));
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let biases = (0..outputs).map(|_| draw()).collect();
        Self { inputs, outputs, weights, biases }
    }

    /// `out ← X·Wᵀ + b` for a row-major `batch × inputs` block.
    fn affine(&self, input: &[T], batch: usize, out: &mut Vec<T>) {
        out.clear();
        if batch <= SMALL_BATCH {
            // Packing for GEMM costs as much as the product itself here.
            for x in input.chunks_exact(self.inputs) {
                let start = out.len();
                out.extend_from_slice(&self.biases);
                let row = &mut out[start..];
                for (&xi, w) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
                    for (r, &wv) in row.iter_mut().zip(w) {
                        *r = *r + xi * wv;
                    }
                }
            }
            return;
        }
        out.reserve(batch * self.outputs);
        for _ in 0..batch {
            out.extend_from_slice(&self.biases);
        }
        gemm(
            View::row_major(input, batch, self.inputs),
            View::row_major(&self.weights, self.inputs, self.outputs),
            T::one(),
            out,
        );
    }
}

const SMALL_BATCH: usize = 2;


/// Feedforward network: ReLU on hidden layers, identity on the output head.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork<T> {
    layers: Vec<Layer<T>>,
}

/// Post-activation outputs of every layer for one batch; `activations[0]` is the input.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub batch: usize,
    pub activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn empty() -> Self {
        Self { batch: 0, activations: Vec::new() }
    }

    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Reusable buffers for [`QNetwork::backward_into`].
#[derive(Clone, Debug, Default)]
pub struct BackwardScratch<T> {
    delta: Vec<T>,
    prev: Vec<T>,
}

/// Parameter gradients shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &QNetwork<T>) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.iter().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g = *g * factor);
        }
    }

    /// Flat view in the same order as [`QNetwork::param`].
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }
}

impl<T: Scalar> QNetwork<T> {
    fn check_dims(dims: &[usize]) -> Result<(), DqnError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(DqnError::InvalidLayout(format!(
                "need at least input and output dimensions, all positive; got {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, DqnError> {
        Self::check_dims(dims)?;
        let layers = dims.windows(2).map(|w| Layer::uniform(w[0], w[1], rng)).collect();
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self, DqnError> {
        Self::check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self, DqnError> {
        if layers.is_empty() {
            return Err(DqnError::InvalidLayout("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(DqnError::InvalidLayout(format!("layer {i} has inconsistent buffers")));
            }
        }
        if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(DqnError::InvalidLayout("consecutive layer sizes do not chain".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if index < l.weights.len() {
                return (li, true, index);
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return (li, false, index);
            }
            index -= l.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter access: per layer, weights then biases.
    pub fn param(&self, index: usize) -> T {
        let (li, is_w, i) = self.locate(index);
        let l = &self.layers[li];
        if is_w { l.weights[i] } else { l.biases[i] }
    }

    pub fn set_param(&mut self, index: usize, value: T) {
        let (li, is_w, i) = self.locate(index);
        let l = &mut self.layers[li];
        if is_w { l.weights[i] = value } else { l.biases[i] = value }
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn copy_from(&mut self, other: &Self) -> Result<(), DqnError> {
        if self.dims() != other.dims() {
            return Err(DqnError::ShapeMismatch(self.dims(), other.dims()));
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.biases.copy_from_slice(&src.biases);
        }
        Ok(())
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, DqnError> {
        self.forward_batch(input, 1)
    }

    /// Q-values for a row-major `batch × input_dim` block.
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<Vec<T>, DqnError> {
        self.check_input(inputs, batch)?;
        let mut cur = inputs.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, batch, &mut next);
            if i < last {
                relu(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, inputs: &[T], batch: usize) -> Result<ForwardCache<T>, DqnError> {
        let mut cache = ForwardCache::empty();
        self.forward_cached_into(inputs, batch, &mut cache)?;
        Ok(cache)
    }

    /// As [`QNetwork::forward_cached`], reusing the buffers already in `cache`.
    pub fn forward_cached_into(&self, inputs: &[T], batch: usize, cache: &mut ForwardCache<T>) -> Result<(), DqnError> {
        self.check_input(inputs, batch)?;
        cache.batch = batch;
        cache.activations.resize_with(self.layers.len() + 1, Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(inputs);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(i + 1);
            layer.affine(&done[i], batch, &mut rest[0]);
            if i < last {
                relu(&mut rest[0]);
            }
        }
        Ok(())
    }

    /// Backpropagates `grad_output` (∂L/∂output, `batch × output_dim`) through
    /// the cached pass.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &[T]) -> Gradients<T> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, grad_output, &mut grads, &mut BackwardScratch::default());
        grads
    }

    /// As [`QNetwork::backward`], overwriting `grads` in place.
    pub fn backward_into(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &[T],
        grads: &mut Gradients<T>,
        scratch: &mut BackwardScratch<T>,
    ) {
        let batch = cache.batch;
        assert_eq!(grad_output.len(), batch * self.output_dim());
        assert_eq!(grads.layers.len(), self.layers.len(), "gradient shape mismatch");
        let BackwardScratch { delta, prev } = scratch;
        delta.clear();
        delta.extend_from_slice(grad_output);
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.activations[li];
            let g = &mut grads.layers[li];
            // dWᵀ = Xᵀ·δ
            gemm(
                View::row_major(input, batch, layer.inputs).t(),
                View::row_major(delta, batch, layer.outputs),
                T::zero(),
                &mut g.weights,
            );
            g.biases.iter_mut().for_each(|b| *b = T::zero());
            for row in delta.chunks_exact(layer.outputs) {
                for (gb, d) in g.biases.iter_mut().zip(row) {
                    *gb = *gb + *d;
                }
            }
            if li == 0 {
                break;
            }
            // δ_prev = (δ·W) ⊙ relu'(input)
            prev.clear();
            prev.resize(batch * layer.inputs, T::zero());
            gemm(
                View::row_major(delta, batch, layer.outputs),
                View::row_major(&layer.weights, layer.inputs, layer.outputs).t(),
                T::zero(),
                prev,
            );
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= T::zero() {
                    *p = T::zero();
                }
            }
            std::mem::swap(delta, prev);
        }
    }

    fn check_input(&self, inputs: &[T], batch: usize) -> Result<(), DqnError> {
        if inputs.len() != batch * self.input_dim() || batch == 0 {
            return Err(DqnError::InputDimension {
                expected: self.input_dim(),
                got: if batch == 0 { inputs.len() } else { inputs.len() / batch },
            });
        }
        Ok(())
    }
}

impl QNetwork<f32> {
    /// Widening copy, used by gradient checks.
    pub fn to_f64(&self) -> QNetwork<f64> {
        QNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&v| v as f64).collect(),
                    biases: l.biases.iter().map(|&v| v as f64).collect(),
                })
                .collect(),
        }
    }
}

fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}
