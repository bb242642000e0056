//! Dense neural-network engine: forward pass, exact backpropagation with
//! L1/L2 kernel, L2 bias, and L2 activity regularization, Adam and SGD
//! optimizers, and a versioned binary save format.
//!
//! The engine is deliberately minimal — fully connected layers over `f64`,
//! binary cross-entropy against a single sigmoid output — which keeps the
//! gradients exactly checkable against finite differences.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::rng::{stream, tags};

/// Probabilities are clamped to this floor (and `1 -` it) before the BCE log.
const P_CLAMP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}; training diverged (reduce the learning rate)")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("model file I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    BadFormat(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value; the ReLU
    /// subgradient at 0 is taken as 0.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One hidden layer: width, activation, and regularization coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    /// L1 coefficient on the weight matrix.
    pub kernel_l1: f64,
    /// L2 coefficient on the weight matrix (penalty `l2 * sum(w^2)`).
    pub kernel_l2: f64,
    /// L2 coefficient on the bias vector.
    pub bias_l2: f64,
    /// L2 coefficient on the layer outputs, averaged over the batch.
    pub activity_l2: f64,
}

impl Default for LayerSpec {
    fn default() -> Self {
        Self {
            width: 32,
            activation: Activation::Relu,
            kernel_l1: 0.0,
            kernel_l2: 0.0,
            bias_l2: 0.0,
            activity_l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Full training configuration. The output layer is always a single sigmoid
/// unit and carries no regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<LayerSpec>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
}

impl NetworkSpec {
    fn validate(&self) -> Result<(), NnetError> {
        if self.input_dim == 0 {
            return Err(NnetError::InvalidSpec("input_dim must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnetError::InvalidSpec("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NnetError::InvalidSpec("learning_rate must be positive".into()));
        }
        for (i, layer) in self.hidden.iter().enumerate() {
            if layer.width == 0 {
                return Err(NnetError::InvalidSpec(format!("hidden layer {i} has width 0")));
            }
            let coeffs =
                [layer.kernel_l1, layer.kernel_l2, layer.bias_l2, layer.activity_l2];
            if coeffs.iter().any(|c| *c < 0.0 || !c.is_finite()) {
                return Err(NnetError::InvalidSpec(format!(
                    "hidden layer {i} has a negative regularization coefficient"
                )));
            }
        }
        Ok(())
    }
}

/// The benchmark's deep model: four hidden layers of 100 ReLU units with an
/// L1-L2 kernel regularizer and L2 regularizers on biases and activations,
/// trained with Adam for 300 epochs at batch size 10.
pub fn deep_spec(input_dim: usize, seed: u64) -> NetworkSpec {
    let layer = LayerSpec {
        width: 100,
        activation: Activation::Relu,
        kernel_l1: 1e-5,
        kernel_l2: 1e-4,
        bias_l2: 1e-4,
        activity_l2: 1e-4,
    };
    NetworkSpec {
        input_dim,
        hidden: vec![layer.clone(), layer.clone(), layer.clone(), layer],
        epochs: 300,
        batch_size: 10,
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.001,
        seed,
    }
}

/// The shallow "plain neural network" baseline: one hidden layer of 32 ReLU
/// units, unregularized, otherwise trained like the deep model.
pub fn shallow_spec(input_dim: usize, seed: u64) -> NetworkSpec {
    NetworkSpec {
        input_dim,
        hidden: vec![LayerSpec::default()],
        epochs: 300,
        batch_size: 10,
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.001,
        seed,
    }
}

/// Geometry of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone)]
struct LayerShape {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    kernel_l1: f64,
    kernel_l2: f64,
    bias_l2: f64,
    activity_l2: f64,
    /// Offset of the row-major `in_dim x out_dim` weight block.
    w_off: usize,
    /// Offset of the `out_dim` bias block.
    b_off: usize,
}

/// A dense network with parameters in one flat vector
/// (`[W0, b0, W1, b1, ...]`, weights row-major by input unit).
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, NnetError> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.hidden.len() + 1);
        let mut in_dim = spec.input_dim;
        let mut offset = 0;
        for h in &spec.hidden {
            layers.push(LayerShape {
                in_dim,
                out_dim: h.width,
                activation: h.activation,
                kernel_l1: h.kernel_l1,
                kernel_l2: h.kernel_l2,
                bias_l2: h.bias_l2,
                activity_l2: h.activity_l2,
                w_off: offset,
                b_off: offset + in_dim * h.width,
            });
            offset += in_dim * h.width + h.width;
            in_dim = h.width;
        }
        // Output layer: one sigmoid unit, no regularization.
        layers.push(LayerShape {
            in_dim,
            out_dim: 1,
            activation: Activation::Sigmoid,
            kernel_l1: 0.0,
            kernel_l2: 0.0,
            bias_l2: 0.0,
            activity_l2: 0.0,
            w_off: offset,
            b_off: offset + in_dim,
        });
        offset += in_dim + 1;
        Ok(Self { spec, layers, params: vec![0.0; offset] })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), NnetError> {
        if params.len() != self.params.len() {
            return Err(NnetError::ShapeMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    /// Seeded He-style uniform initialization: weights from
    /// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, biases zero.
    pub fn initialize(&mut self, rng: &mut impl Rng) {
        for layer in &self.layers {
            let limit = (6.0 / layer.in_dim as f64).sqrt();
            for w in
                &mut self.params[layer.w_off..layer.w_off + layer.in_dim * layer.out_dim]
            {
                *w = rng.gen_range(-limit..limit);
            }
            for b in &mut self.params[layer.b_off..layer.b_off + layer.out_dim] {
                *b = 0.0;
            }
        }
    }

    /// Discrete state that makes the loss non-smooth: the on/off pattern of
    /// every ReLU unit plus whether any output probability sits near the
    /// clamp boundary. Finite-difference checks are only valid for parameter
    /// perturbations that keep this signature fixed.
    #[cfg(test)]
    fn smoothness_signature(&self, x: &[f64]) -> (Vec<bool>, bool) {
        let n = x.len() / self.spec.input_dim;
        let mut ws = Workspace::new(self, n);
        self.forward_into(x, n, &mut ws);
        let mut bits = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.activation == Activation::Relu {
                bits.extend(ws.acts[l][..n * layer.out_dim].iter().map(|&a| a > 0.0));
            }
        }
        let p = &ws.acts[self.layers.len() - 1][..n];
        let interior = p.iter().all(|&v| v > 10.0 * P_CLAMP && v < 1.0 - 10.0 * P_CLAMP);
        (bits, interior)
    }

    fn check_batch(&self, x: &[f64]) -> Result<usize, NnetError> {
        if x.is_empty() || x.len() % self.spec.input_dim != 0 {
            return Err(NnetError::DimensionMismatch {
                expected: self.spec.input_dim,
                got: x.len(),
            });
        }
        Ok(x.len() / self.spec.input_dim)
    }

    /// Output probability for every row of `x` (row-major,
    /// `rows x input_dim`). Each row's output depends only on that row.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnetError> {
        let n = self.check_batch(x)?;
        let mut ws = Workspace::new(self, n);
        self.forward_into(x, n, &mut ws);
        Ok(ws.acts.last().unwrap()[..n].to_vec())
    }

    /// Regularized mean binary cross-entropy of the batch.
    pub fn loss(&self, x: &[f64], labels: &[u8]) -> Result<f64, NnetError> {
        let n = self.check_batch(x)?;
        if labels.len() != n {
            return Err(NnetError::DimensionMismatch { expected: n, got: labels.len() });
        }
        let mut ws = Workspace::new(self, n);
        self.forward_into(x, n, &mut ws);
        Ok(self.loss_from_workspace(labels, n, &ws))
    }

    /// Exact gradient of [`Network::loss`] with respect to every parameter.
    pub fn gradients(&self, x: &[f64], labels: &[u8]) -> Result<Vec<f64>, NnetError> {
        let n = self.check_batch(x)?;
        if labels.len() != n {
            return Err(NnetError::DimensionMismatch { expected: n, got: labels.len() });
        }
        let mut ws = Workspace::new(self, n);
        let mut grad = vec![0.0; self.params.len()];
        self.forward_into(x, n, &mut ws);
        self.backward_into(x, labels, n, &mut ws, &mut grad);
        Ok(grad)
    }

    /// Forward pass into preallocated buffers; `ws.acts[l]` holds layer `l`'s
    /// post-activations for the first `n` rows.
    fn forward_into(&self, x: &[f64], n: usize, ws: &mut Workspace) {
        for (l, layer) in self.layers.iter().enumerate() {
            let (i_dim, o_dim) = (layer.in_dim, layer.out_dim);
            let w = &self.params[layer.w_off..layer.w_off + i_dim * o_dim];
            let b = &self.params[layer.b_off..layer.b_off + o_dim];
            let (below, rest) = ws.acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &below[l - 1] };
            let out = &mut rest[0];
            for r in 0..n {
                let zrow = &mut out[r * o_dim..(r + 1) * o_dim];
                zrow.copy_from_slice(b);
                let xrow = &input[r * i_dim..(r + 1) * i_dim];
                for (i, &a) in xrow.iter().enumerate() {
                    let wrow = &w[i * o_dim..(i + 1) * o_dim];
                    for (z, &wv) in zrow.iter_mut().zip(wrow) {
                        *z += a * wv;
                    }
                }
                for z in zrow.iter_mut() {
                    *z = layer.activation.apply(*z);
                }
            }
        }
    }

    fn loss_from_workspace(&self, labels: &[u8], n: usize, ws: &Workspace) -> f64 {
        let p = &ws.acts[self.layers.len() - 1];
        let mut bce = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let pr = p[r].clamp(P_CLAMP, 1.0 - P_CLAMP);
            bce -= if y == 1 { pr.ln() } else { (1.0 - pr).ln() };
        }
        bce / n as f64 + self.penalty(n, ws)
    }

    /// Regularization penalty: kernel L1/L2 and bias L2 summed over layers,
    /// plus activity L2 averaged over the batch.
    fn penalty(&self, n: usize, ws: &Workspace) -> f64 {
        let mut total = 0.0;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.kernel_l1 > 0.0 || layer.kernel_l2 > 0.0 {
                let w = &self.params[layer.w_off..layer.w_off + layer.in_dim * layer.out_dim];
                let (mut abs, mut sq) = (0.0, 0.0);
                for &v in w {
                    abs += v.abs();
                    sq += v * v;
                }
                total += layer.kernel_l1 * abs + layer.kernel_l2 * sq;
            }
            if layer.bias_l2 > 0.0 {
                let b = &self.params[layer.b_off..layer.b_off + layer.out_dim];
                total += layer.bias_l2 * b.iter().map(|v| v * v).sum::<f64>();
            }
            if layer.activity_l2 > 0.0 {
                let a = &ws.acts[l][..n * layer.out_dim];
                total += layer.activity_l2 * a.iter().map(|v| v * v).sum::<f64>() / n as f64;
            }
        }
        total
    }

    /// Reverse pass; requires `forward_into` to have filled `ws` for the same
    /// batch. Adds nothing to `grad` — it is fully overwritten.
    fn backward_into(
        &self,
        x: &[f64],
        labels: &[u8],
        n: usize,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) {
        grad.fill(0.0);
        let n_f = n as f64;
        let last = self.layers.len() - 1;

        // Output delta on the pre-activation: fused sigmoid + BCE.
        {
            let p = &ws.acts[last];
            let d = &mut ws.deltas[last];
            for r in 0..n {
                d[r] = (p[r] - f64::from(labels[r])) / n_f;
            }
        }

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (i_dim, o_dim) = (layer.in_dim, layer.out_dim);

            // Gradient wrt this layer's weights and biases.
            {
                let input: &[f64] = if l == 0 { x } else { &ws.acts[l - 1] };
                let delta = &ws.deltas[l];
                let gw = &mut grad[layer.w_off..layer.w_off + i_dim * o_dim];
                for r in 0..n {
                    let xrow = &input[r * i_dim..(r + 1) * i_dim];
                    let drow = &delta[r * o_dim..(r + 1) * o_dim];
                    for (i, &a) in xrow.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let grow = &mut gw[i * o_dim..(i + 1) * o_dim];
                        for (g, &d) in grow.iter_mut().zip(drow) {
                            *g += a * d;
                        }
                    }
                }
                let gb = &mut grad[layer.b_off..layer.b_off + o_dim];
                for r in 0..n {
                    let drow = &delta[r * o_dim..(r + 1) * o_dim];
                    for (g, &d) in gb.iter_mut().zip(drow) {
                        *g += d;
                    }
                }
            }

            // Regularization contributions.
            {
                let w = &self.params[layer.w_off..layer.w_off + i_dim * o_dim];
                let gw = &mut grad[layer.w_off..layer.w_off + i_dim * o_dim];
                if layer.kernel_l1 > 0.0 || layer.kernel_l2 > 0.0 {
                    for (g, &v) in gw.iter_mut().zip(w) {
                        // L1 subgradient at 0 taken as 0.
                        let sign = if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *g += layer.kernel_l1 * sign + 2.0 * layer.kernel_l2 * v;
                    }
                }
                if layer.bias_l2 > 0.0 {
                    let b = &self.params[layer.b_off..layer.b_off + o_dim];
                    let gb = &mut grad[layer.b_off..layer.b_off + o_dim];
                    for (g, &v) in gb.iter_mut().zip(b) {
                        *g += 2.0 * layer.bias_l2 * v;
                    }
                }
            }

            // Delta for the layer below: backpropagate through W, add the
            // activity penalty's direct term, then apply the activation
            // derivative of the layer below.
            if l > 0 {
                let below = &self.layers[l - 1];
                let w = &self.params[layer.w_off..layer.w_off + i_dim * o_dim];
                let (upper, lower) = split_two(&mut ws.deltas, l);
                let delta = &upper[..n * o_dim];
                let prev = &mut lower[..n * i_dim];
                prev.fill(0.0);
                for r in 0..n {
                    let drow = &delta[r * o_dim..(r + 1) * o_dim];
                    let prow = &mut prev[r * i_dim..(r + 1) * i_dim];
                    for i in 0..i_dim {
                        let wrow = &w[i * o_dim..(i + 1) * o_dim];
                        let mut acc = 0.0;
                        for (d, wv) in drow.iter().zip(wrow) {
                            acc += d * wv;
                        }
                        prow[i] = acc;
                    }
                }
                let a_below = &ws.acts[l - 1];
                let act_coeff = 2.0 * below.activity_l2 / n_f;
                for (d, &a) in prev.iter_mut().zip(&a_below[..n * i_dim]) {
                    *d = (*d + act_coeff * a) * below.activation.derivative_from_output(a);
                }
            }
        }
    }
}

/// Mutable views of `deltas[l]` and `deltas[l-1]` at once.
fn split_two(deltas: &mut [Vec<f64>], l: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    let (lo, hi) = deltas.split_at_mut(l);
    (&mut hi[0], &mut lo[l - 1])
}

/// Scratch buffers for one batch size; reused across training steps.
struct Workspace {
    /// Post-activations per layer (`n x out_dim`, row-major).
    acts: Vec<Vec<f64>>,
    /// Pre-activation deltas per layer.
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &Network, batch_cap: usize) -> Self {
        let acts =
            net.layers.iter().map(|l| vec![0.0; batch_cap * l.out_dim]).collect::<Vec<_>>();
        let deltas =
            net.layers.iter().map(|l| vec![0.0; batch_cap * l.out_dim]).collect::<Vec<_>>();
        Self { acts, deltas }
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the standard defaults (beta1 0.9, beta2 0.999,
    /// epsilon 1e-8).
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One Adam update:
/// `m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;`
/// `p <- p - lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected moments.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<(), NnetError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NnetError::ShapeMismatch { expected: state.m.len(), got: grads.len() });
    }
    state.t += 1;
    let c1 = 1.0 - state.beta1.powi(state.t as i32);
    let c2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Plain gradient step `p <- p - lr * g`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), NnetError> {
    if params.len() != grads.len() {
        return Err(NnetError::ShapeMismatch { expected: params.len(), got: grads.len() });
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// A trained network plus its per-epoch training-loss trace.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub network: Network,
    /// Mean regularized batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainedNetwork {
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnetError> {
        self.network.forward(x)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnetError> {
        let mut file = std::fs::File::create(path)?;
        let bytes = serialize_network(self);
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnetError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        deserialize_network(&bytes)
    }
}

/// Train a network on the (already standardized) feature matrix.
///
/// Runs `epochs x ceil(n / batch_size)` optimizer steps over seeded shuffled
/// mini-batches. The per-epoch mean batch loss is recorded; a non-finite loss
/// or parameter aborts training with [`NnetError::NonFiniteLoss`].
pub fn train(spec: &NetworkSpec, matrix: &FeatureMatrix) -> Result<TrainedNetwork, NnetError> {
    if matrix.n_cols() != spec.input_dim {
        return Err(NnetError::DimensionMismatch {
            expected: spec.input_dim,
            got: matrix.n_cols(),
        });
    }
    let labels = matrix.labels();
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(NnetError::SingleClass);
    }
    let mut net = Network::new(spec.clone())?;
    let mut rng = stream(spec.seed, &[tags::NNET]);
    net.initialize(&mut rng);

    let n = matrix.n_rows();
    let batch = spec.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut ws = Workspace::new(&net, batch);
    let mut grad = vec![0.0; net.n_params()];
    let mut xbuf = vec![0.0; batch * spec.input_dim];
    let mut ybuf = vec![0u8; batch];
    let mut adam = match spec.optimizer {
        OptimizerKind::Adam => Some(AdamState::new(net.n_params())),
        OptimizerKind::Sgd => None,
    };
    let mut trace = Vec::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(batch) {
            let bn = chunk.len();
            for (slot, &row) in chunk.iter().enumerate() {
                let dst = &mut xbuf[slot * spec.input_dim..(slot + 1) * spec.input_dim];
                dst.copy_from_slice(matrix.row(row));
                ybuf[slot] = labels[row];
            }
            net.forward_into(&xbuf[..bn * spec.input_dim], bn, &mut ws);
            let loss = net.loss_from_workspace(&ybuf[..bn], bn, &ws);
            if !loss.is_finite() {
                return Err(NnetError::NonFiniteLoss { epoch });
            }
            net.backward_into(&xbuf[..bn * spec.input_dim], &ybuf[..bn], bn, &mut ws, &mut grad);
            match &mut adam {
                Some(state) => adam_step(state, &mut net.params, &grad, spec.learning_rate)?,
                None => sgd_step(&mut net.params, &grad, spec.learning_rate)?,
            }
            epoch_loss += loss;
            steps += 1;
        }
        trace.push(epoch_loss / steps as f64);
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(NnetError::NonFiniteLoss { epoch });
        }
    }
    Ok(TrainedNetwork { network: net, loss_trace: trace })
}

// ---------------------------------------------------------------------------
// Versioned binary format: magic "PSNN", little-endian throughout.
// v1 layout: magic, u32 version, spec (seed u64, input_dim/epochs/batch u32,
// optimizer u8, lr f64, hidden count u32, then per hidden layer width u32,
// activation u8, four f64 coefficients), u64 param count, f64 params,
// u64 trace length, f64 trace.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"PSNN";
const FORMAT_VERSION: u32 = 1;

fn serialize_network(trained: &TrainedNetwork) -> Vec<u8> {
    let spec = &trained.network.spec;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&spec.seed.to_le_bytes());
    out.extend_from_slice(&(spec.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(spec.epochs as u32).to_le_bytes());
    out.extend_from_slice(&(spec.batch_size as u32).to_le_bytes());
    out.push(match spec.optimizer {
        OptimizerKind::Adam => 0,
        OptimizerKind::Sgd => 1,
    });
    out.extend_from_slice(&spec.learning_rate.to_le_bytes());
    out.extend_from_slice(&(spec.hidden.len() as u32).to_le_bytes());
    for h in &spec.hidden {
        out.extend_from_slice(&(h.width as u32).to_le_bytes());
        out.push(match h.activation {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
        });
        for c in [h.kernel_l1, h.kernel_l2, h.bias_l2, h.activity_l2] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out.extend_from_slice(&(trained.network.params.len() as u64).to_le_bytes());
    for p in &trained.network.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&(trained.loss_trace.len() as u64).to_le_bytes());
    for p in &trained.loss_trace {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnetError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnetError::BadFormat("file truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnetError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NnetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn deserialize_network(bytes: &[u8]) -> Result<TrainedNetwork, NnetError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(NnetError::BadFormat("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnetError::UnsupportedVersion(version));
    }
    let seed = c.u64()?;
    let input_dim = c.u32()? as usize;
    let epochs = c.u32()? as usize;
    let batch_size = c.u32()? as usize;
    let optimizer = match c.u8()? {
        0 => OptimizerKind::Adam,
        1 => OptimizerKind::Sgd,
        k => return Err(NnetError::BadFormat(format!("unknown optimizer code {k}"))),
    };
    let learning_rate = c.f64()?;
    let n_hidden = c.u32()? as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        let width = c.u32()? as usize;
        let activation = match c.u8()? {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            k => return Err(NnetError::BadFormat(format!("unknown activation code {k}"))),
        };
        let kernel_l1 = c.f64()?;
        let kernel_l2 = c.f64()?;
        let bias_l2 = c.f64()?;
        let activity_l2 = c.f64()?;
        hidden.push(LayerSpec { width, activation, kernel_l1, kernel_l2, bias_l2, activity_l2 });
    }
    let spec = NetworkSpec {
        input_dim,
        hidden,
        epochs,
        batch_size,
        optimizer,
        learning_rate,
        seed,
    };
    let mut net = Network::new(spec)?;
    let n_params = c.u64()? as usize;
    if n_params != net.params.len() {
        return Err(NnetError::BadFormat(format!(
            "parameter count {n_params} does not match the architecture ({})",
            net.params.len()
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(c.f64()?);
    }
    net.set_params(params)?;
    let n_trace = c.u64()? as usize;
    let mut loss_trace = Vec::with_capacity(n_trace.min(1 << 20));
    for _ in 0..n_trace {
        loss_trace.push(c.f64()?);
    }
    Ok(TrainedNetwork { network: net, loss_trace })
}
