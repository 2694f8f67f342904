//! The fully connected ELU network that maps edge features to weights.

use super::tape::{Tape, Var};
use super::NeuralError;
use crate::channel::derive_stream;

/// Layer widths of the edge-weight network: 4 features in, two hidden
/// layers of 32 units, one weight out.
pub const CANONICAL_DIMS: [usize; 4] = [4, 32, 32, 1];

/// Trainable parameter count of the canonical architecture:
/// `(4·32 + 32) + (32·32 + 32) + (32·1 + 1)`.
pub const CANONICAL_PARAMS: usize = 1249;

/// `x` for `x > 0`, `β(eˣ − 1)` otherwise.
#[inline]
pub fn elu(x: f64, beta: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        beta * (x.exp() - 1.0)
    }
}

const LANES: usize = 8;

/// Derivative of [`elu`] written in terms of its output `a`.
#[inline]
fn elu_grad_from_output(a: f64, beta: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        a + beta
    }
}

/// Feed-forward network with ELU after every layer, including the output.
///
/// Weights are stored row-major (`out × in`) per layer. The flat parameter
/// order is `W1, b1, W2, b2, …`, the order used by the model file.
#[derive(Clone, Debug, PartialEq)]
pub struct FnnModel {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub elu_beta: f64,
    /// Clip factor of the decoder the model was trained with.
    pub alpha: f64,
}

impl FnnModel {
    /// All-zero parameters for arbitrary layer widths.
    pub fn zeros(layer_dims: &[usize], elu_beta: f64, alpha: f64) -> Self {
        assert!(layer_dims.len() >= 2 && layer_dims.iter().all(|&d| d > 0));
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            elu_beta,
            alpha,
        }
    }

    /// Canonical architecture, seeded initialisation.
    ///
    /// Hidden layers are Glorot-uniform with zero bias. The output layer
    /// uses a tenth of the Glorot range and bias 1, so a fresh model emits
    /// weights close to 1 and starts out near plain BP.
    pub fn init(seed: u64, elu_beta: f64, alpha: f64) -> Self {
        let mut model = Self::zeros(&CANONICAL_DIMS, elu_beta, alpha);
        let n_layers = model.n_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (model.layer_dims[l], model.layer_dims[l + 1]);
            let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == n_layers {
                limit *= 0.1;
                model.biases[l].iter_mut().for_each(|b| *b = 1.0);
            }
            let mut rng = derive_stream(seed, &[0x1417, l as u64]);
            for w in model.weights[l].iter_mut() {
                *w = rng.uniform(-limit, limit);
            }
        }
        model
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn is_canonical(&self) -> bool {
        self.layer_dims == CANONICAL_DIMS
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.n_params() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (head, tail) = rest.split_at(w.len());
            w.copy_from_slice(head);
            let (head, tail) = tail.split_at(b.len());
            b.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Scalar output `g_θ(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64, NeuralError> {
        if x.len() != self.n_inputs() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.n_inputs(),
                actual: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFiniteInput);
        }
        let mut act = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            act = (0..n_out)
                .map(|o| {
                    let z =
                        (0..n_in).fold(self.biases[l][o], |acc, j| acc + w[o * n_in + j] * act[j]);
                    elu(z, self.elu_beta)
                })
                .collect();
        }
        Ok(act[0])
    }

    /// Registers every parameter as a tape input, in flat order.
    pub fn param_vars(&self, tape: &mut Tape) -> Vec<Var> {
        self.to_flat().into_iter().map(|p| tape.input(p)).collect()
    }

    /// Records the forward pass on `tape` using parameter nodes from
    /// [`FnnModel::param_vars`].
    pub fn forward_taped(&self, tape: &mut Tape, params: &[Var], x: &[Var]) -> Var {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(x.len(), self.n_inputs());
        let mut act = x.to_vec();
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            act = (0..n_out)
                .map(|o| {
                    let mut z = b[o];
                    for j in 0..n_in {
                        let term = tape.mul(w[o * n_in + j], act[j]);
                        z = tape.add(z, term);
                    }
                    tape.elu(z, self.elu_beta)
                })
                .collect();
        }
        act[0]
    }
}

/// Batched evaluation and backpropagation for one [`FnnModel`].
///
/// Produces exactly the same values as [`FnnModel::forward`]: each unit
/// starts from its bias and adds input terms in index order.
#[derive(Clone, Debug)]
pub struct FnnKernel {
    dims: Vec<usize>,
    /// Per layer, transposed weights (`in × out`).
    wt: Vec<Vec<f64>>,
    /// Per layer, row-major weights (`out × in`).
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    beta: f64,
    /// Offsets of each layer's weights in the flat parameter vector.
    offsets: Vec<usize>,
    n_params: usize,
}

/// Activations recorded by [`FnnKernel::forward_batch_traced`]:
/// `acts[0]` holds the inputs, `acts[l + 1]` the outputs of layer `l`.
#[derive(Clone, Debug, Default)]
pub struct FnnTrace {
    pub acts: Vec<Vec<f64>>,
}

impl FnnKernel {
    pub fn new(model: &FnnModel) -> Self {
        let dims = model.layer_dims.clone();
        let mut wt = Vec::new();
        let mut offsets = Vec::new();
        let mut off = 0;
        for l in 0..model.n_layers() {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            let mut t = vec![0.0; n_in * n_out];
            for o in 0..n_out {
                for j in 0..n_in {
                    t[j * n_out + o] = model.weights[l][o * n_in + j];
                }
            }
            wt.push(t);
            offsets.push(off);
            off += n_in * n_out + n_out;
        }
        Self {
            dims,
            wt,
            w: model.weights.clone(),
            b: model.biases.clone(),
            beta: model.elu_beta,
            offsets,
            n_params: off,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    fn layer(&self, l: usize, input: &[f64], output: &mut [f64]) {
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let samples = input.len() / n_in;
        let (wt, bias) = (&self.wt[l], &self.b[l]);
        let full = n_out / LANES * LANES;
        for s in 0..samples {
            let x = &input[s * n_in..(s + 1) * n_in];
            let z = &mut output[s * n_out..(s + 1) * n_out];
            // Eight outputs at a time stay in registers across the inputs.
            for c in (0..full).step_by(LANES) {
                let mut acc: [f64; LANES] = bias[c..c + LANES].try_into().unwrap();
                for (j, &xj) in x.iter().enumerate() {
                    let w: &[f64; LANES] =
                        wt[j * n_out + c..j * n_out + c + LANES].try_into().unwrap();
                    for k in 0..LANES {
                        acc[k] += w[k] * xj;
                    }
                }
                z[c..c + LANES].copy_from_slice(&acc);
            }
            for o in full..n_out {
                z[o] = x
                    .iter()
                    .enumerate()
                    .fold(bias[o], |acc, (j, &xj)| acc + wt[j * n_out + o] * xj);
            }
            for zo in z.iter_mut() {
                *zo = elu(*zo, self.beta);
            }
        }
    }

    /// `out[s] = g_θ(inputs[s·in .. (s+1)·in])`.
    pub fn forward_batch(&self, inputs: &[f64], out: &mut [f64]) {
        let mut trace = FnnTrace::default();
        self.forward_batch_traced(inputs, &mut trace);
        out.copy_from_slice(trace.acts.last().unwrap());
    }

    pub fn forward_batch_traced(&self, inputs: &[f64], trace: &mut FnnTrace) {
        let samples = inputs.len() / self.dims[0];
        trace.acts.resize(self.dims.len(), Vec::new());
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(inputs);
        for l in 0..self.dims.len() - 1 {
            let (before, after) = trace.acts.split_at_mut(l + 1);
            let out = &mut after[0];
            out.clear();
            out.resize(samples * self.dims[l + 1], 0.0);
            self.layer(l, &before[l], out);
        }
    }

    /// Accumulates `Σ_s g_out[s]·∂out[s]/∂θ` into `grad_params` (flat
    /// order) and writes `∂/∂inputs` into `grad_inputs`.
    pub fn backward_batch(
        &self,
        trace: &FnnTrace,
        g_out: &[f64],
        grad_params: &mut [f64],
        grad_inputs: &mut [f64],
    ) {
        let n_layers = self.dims.len() - 1;
        let samples = g_out.len();
        let mut g_a = g_out.to_vec();
        // Pre-activation gradients, output-major (`out × samples`).
        let mut g_zt = Vec::new();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let a_out = &trace.acts[l + 1];
            let a_in = &trace.acts[l];
            g_zt.clear();
            g_zt.resize(n_out * samples, 0.0);
            for s in 0..samples {
                for o in 0..n_out {
                    g_zt[o * samples + s] =
                        g_a[s * n_out + o] * elu_grad_from_output(a_out[s * n_out + o], self.beta);
                }
            }

            let off = self.offsets[l];
            let (gw, rest) = grad_params[off..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            let full_in = n_in / LANES * LANES;
            for o in 0..n_out {
                let gz = &g_zt[o * samples..(o + 1) * samples];
                gb[o] += gz.iter().sum::<f64>();
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for c in (0..full_in).step_by(LANES) {
                    let mut acc = [0.0; LANES];
                    for (s, &g) in gz.iter().enumerate() {
                        let x: &[f64; LANES] =
                            a_in[s * n_in + c..s * n_in + c + LANES].try_into().unwrap();
                        for k in 0..LANES {
                            acc[k] += g * x[k];
                        }
                    }
                    for k in 0..LANES {
                        row[c + k] += acc[k];
                    }
                }
                for j in full_in..n_in {
                    row[j] += gz
                        .iter()
                        .enumerate()
                        .map(|(s, &g)| g * a_in[s * n_in + j])
                        .sum::<f64>();
                }
            }

            let w = &self.w[l];
            let mut next = vec![0.0; samples * n_in];
            for s in 0..samples {
                let dst = &mut next[s * n_in..(s + 1) * n_in];
                for c in (0..full_in).step_by(LANES) {
                    let mut acc = [0.0; LANES];
                    for o in 0..n_out {
                        let g = g_zt[o * samples + s];
                        let wr: &[f64; LANES] =
                            w[o * n_in + c..o * n_in + c + LANES].try_into().unwrap();
                        for k in 0..LANES {
                            acc[k] += g * wr[k];
                        }
                    }
                    dst[c..c + LANES].copy_from_slice(&acc);
                }
                for j in full_in..n_in {
                    dst[j] = (0..n_out)
                        .map(|o| g_zt[o * samples + s] * w[o * n_in + j])
                        .sum();
                }
            }
            g_a = next;
        }
        grad_inputs[..g_a.len()].copy_from_slice(&g_a);
    }
}
