//! From-scratch fully-connected ReLU network with exact reverse-mode
//! gradients.
//!
//! The architecture is the recursion `phi_0(x) = x`,
//! `phi_{j+1}(x) = relu(A_j phi_j(x) + b_j)` for j = 0..L-1, and a
//! bias-free affine readout `phi(x) = A_L phi_L(x)`. Depth L counts the
//! hidden layers; width W is the widest hidden layer. The ReLU derivative
//! at exactly zero is taken as zero.
//!
//! Everything is 64-bit and deterministic: initialization is a pure
//! function of the seed, and forward/backward passes use fixed reduction
//! orders so repeated evaluation is bit-identical.

pub mod checkpoint;
pub mod loss;
pub mod optim;

pub use checkpoint::{Checkpoint, CheckpointExtra, RngState, CHECKPOINT_SCHEMA_VERSION};
pub use loss::{loss_grad_into, loss_value, LossKind};
pub use optim::{cosine_lr, optimizer_step, OptimState, OptimizerKind};

use rand::Rng;

/// Weights and biases of a depth-L ReLU network.
///
/// `sizes = [N_0, N_1, ..., N_{L+1}]` with L >= 1 hidden layers. Weight
/// matrix j is stored row-major with shape `sizes[j+1] x sizes[j]`; bias
/// j (j < L) has length `sizes[j+1]`. The readout layer has no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Per-parameter buffers shaped like [`MlpParams`] (gradients, optimizer
/// moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Gradients {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= c;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= c;
            }
        }
    }
}

impl MlpParams {
    /// All-zero network of the given layer sizes.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 3, "need at least one hidden layer");
        assert!(sizes.iter().all(|&n| n > 0), "layer sizes must be positive");
        let l = sizes.len() - 2;
        let weights = (0..=l).map(|j| vec![0.0; sizes[j + 1] * sizes[j]]).collect();
        let biases = (0..l).map(|j| vec![0.0; sizes[j + 1]]).collect();
        MlpParams { sizes: sizes.to_vec(), weights, biases }
    }

    /// He-style initialization: weight entries drawn from a zero-mean
    /// Gaussian with standard deviation sqrt(2 / fan_in), biases zero.
    /// Layer by layer, row-major draw order; bit-identical for a fixed
    /// seed.
    pub fn he_init<R: Rng>(rng: &mut R, sizes: &[usize]) -> Self {
        let mut params = Self::zeros(sizes);
        for (j, w) in params.weights.iter_mut().enumerate() {
            let std = (2.0 / sizes[j] as f64).sqrt();
            for v in w.iter_mut() {
                *v = std * standard_normal(rng);
            }
        }
        params
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Number of hidden layers L.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 2
    }

    /// Widest hidden layer.
    pub fn width(&self) -> usize {
        self.sizes[1..self.sizes.len() - 1].iter().copied().max().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Forward pass; allocates a fresh workspace. Prefer
    /// [`MlpParams::forward_into`] in loops.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::for_params(self);
        self.forward_into(x, &mut ws);
        ws.output().to_vec()
    }

    /// Forward pass writing activations into `ws`; the output lives in
    /// `ws.output()`.
    pub fn forward_into(&self, x: &[f64], ws: &mut Workspace) {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let l = self.depth();
        ws.acts[0].copy_from_slice(x);
        for j in 0..l {
            let rows = self.sizes[j + 1];
            let w = &self.weights[j];
            let b = &self.biases[j];
            let cols = self.sizes[j];
            let (prev, rest) = ws.acts.split_at_mut(j + 1);
            let input = &prev[j];
            let act = &mut rest[0];
            let pre = &mut ws.pres[j];
            for o in 0..rows {
                let z = b[o] + dot(&w[o * cols..(o + 1) * cols], input);
                pre[o] = z;
                act[o] = if z > 0.0 { z } else { 0.0 };
            }
        }
        let rows = self.output_dim();
        let cols = self.sizes[l];
        let w = &self.weights[l];
        let input = &ws.acts[l];
        for o in 0..rows {
            ws.out[o] = dot(&w[o * cols..(o + 1) * cols], input);
        }
    }

    /// The norm product `||A_L|| * prod_j max(||(A_j, b_j)||, 1)` over the
    /// hidden layers, a capacity diagnostic for the trained network.
    /// `||.||` is the Frobenius norm of the bias-augmented matrix; the
    /// choice of matrix norm is isolated here so a spectral variant could
    /// be swapped in.
    pub fn weight_bound(&self) -> f64 {
        let l = self.depth();
        let frob = |vs: &[f64]| vs.iter().map(|v| v * v).sum::<f64>();
        let mut p = frob(&self.weights[l]).sqrt();
        for j in 0..l {
            let norm = (frob(&self.weights[j]) + frob(&self.biases[j])).sqrt();
            p *= norm.max(1.0);
        }
        p
    }
}

/// Reusable forward/backward buffers for one network shape.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
    out: Vec<f64>,
    dout: Vec<f64>,
    dacts: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn for_params(params: &MlpParams) -> Self {
        let l = params.depth();
        let sizes = &params.sizes;
        Workspace {
            acts: (0..=l).map(|j| vec![0.0; sizes[j]]).collect(),
            pres: (0..l).map(|j| vec![0.0; sizes[j + 1]]).collect(),
            out: vec![0.0; params.output_dim()],
            dout: vec![0.0; params.output_dim()],
            dacts: (0..=l).map(|j| vec![0.0; sizes[j]]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        &self.out
    }

    /// Hidden-layer pre-activations from the last forward pass, one
    /// vector per hidden layer.
    pub fn preactivations(&self) -> &[Vec<f64>] {
        &self.pres
    }
}

/// Mean loss over a batch and its exact gradient, accumulated into
/// `grads` (which is zeroed first). Returns the mean loss.
pub fn loss_and_grad(
    params: &MlpParams,
    batch: &[(&[f64], &[f64])],
    kind: LossKind,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    assert!(!batch.is_empty(), "empty batch");
    grads.fill_zero();
    let l = params.depth();
    let mut total = 0.0;
    for (x, y) in batch {
        params.forward_into(x, ws);
        total += loss_value(kind, &ws.out, y);
        loss_grad_into(kind, &ws.out, y, &mut ws.dout);

        // Readout layer: no bias, no activation.
        let cols = params.sizes[l];
        let rows = params.output_dim();
        let w = &params.weights[l];
        let gw = &mut grads.weights[l];
        let input = &ws.acts[l];
        ws.dacts[l].fill(0.0);
        for o in 0..rows {
            let delta = ws.dout[o];
            if delta != 0.0 {
                axpy(delta, input, &mut gw[o * cols..(o + 1) * cols]);
                axpy(delta, &w[o * cols..(o + 1) * cols], &mut ws.dacts[l]);
            }
        }

        for j in (0..l).rev() {
            let cols = params.sizes[j];
            let rows = params.sizes[j + 1];
            let w = &params.weights[j];
            let gw = &mut grads.weights[j];
            let gb = &mut grads.biases[j];
            let (lower, upper) = ws.dacts.split_at_mut(j + 1);
            let dact_in = &mut lower[j];
            let dact_out = &upper[0];
            dact_in.fill(0.0);
            let pre = &ws.pres[j];
            let input = &ws.acts[j];
            for o in 0..rows {
                // ReLU subgradient at 0 taken as 0.
                let delta = if pre[o] > 0.0 { dact_out[o] } else { 0.0 };
                if delta != 0.0 {
                    gb[o] += delta;
                    axpy(delta, input, &mut gw[o * cols..(o + 1) * cols]);
                    axpy(delta, &w[o * cols..(o + 1) * cols], dact_in);
                }
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    total * inv
}

/// Dot product with a fixed 4-way unrolled accumulation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in (&mut ca).zip(&mut cb) {
        s0 += x[0] * y[0];
        s1 += x[1] * y[1];
        s2 += x[2] * y[2];
        s3 += x[3] * y[3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(c: f64, src: &[f64], dst: &mut [f64]) {
    debug_assert_eq!(src.len(), dst.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Standard normal deviate via Box-Muller; consumes exactly two uniforms
/// per call so the draw sequence is stable.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
