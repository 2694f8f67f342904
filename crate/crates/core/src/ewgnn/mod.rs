//! Edge-weighted GNN decoder.
//!
//! Each iteration runs four phases over the whole graph:
//!
//! 1. check-to-variable messages through the clipped check kernel;
//! 2. per-edge features and weights `w_e = g_θ(x_e)`;
//! 3. variable-to-check messages `s_i + Σ_{others} w·μ`;
//! 4. node embeddings `h_i = s_i + Σ w·μ`.
//!
//! The feature vector of edge `(u → v)` at iteration `t` is
//! `[|μ_c2v|, |μ_c2v − μ_c2v'|, |μ_v2c' − μ_v2c''|, |h_v' − h_v''|]` where a
//! prime marks the previous iteration. Check messages start at zero,
//! variable messages and embeddings at the channel LLRs. Each class is
//! divided by its mean (edges for the first three, variables for the last)
//! unless that mean is at most `normalization_epsilon`.

mod grad;
pub(crate) mod taped;

pub use grad::{loss_and_gradient, GradWorkspace};
pub use taped::loss_and_gradient_taped;

use thiserror::Error;

use crate::msgpass::{DecodeError, DecodeResult, DecoderState, Scratch};
use crate::neural::{softplus, FnnKernel, FnnModel};
use crate::tanner::TannerGraph;

pub const N_FEATURES: usize = 4;

/// Largest clip factor accepted by [`EwgnnConfig::new`].
pub const MAX_ALPHA: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EwgnnError {
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EwgnnConfig {
    pub alpha: f64,
    pub iterations: usize,
    pub normalization_epsilon: f64,
}

impl EwgnnConfig {
    /// Requires `0 < α ≤ 1e-7` and at least one iteration; the mean guard
    /// defaults to `1e-12`.
    pub fn new(alpha: f64, iterations: usize) -> Result<Self, EwgnnError> {
        let cfg = Self {
            alpha,
            iterations,
            normalization_epsilon: 1e-12,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_epsilon(mut self, eps: f64) -> Result<Self, EwgnnError> {
        self.normalization_epsilon = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), EwgnnError> {
        if !(self.alpha > 0.0 && self.alpha <= MAX_ALPHA) {
            return Err(EwgnnError::InvalidConfig(format!(
                "clip factor {} outside (0, {MAX_ALPHA}]",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(EwgnnError::InvalidConfig(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.normalization_epsilon > 0.0) {
            return Err(EwgnnError::InvalidConfig(
                "normalization epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Normalised features, `E × 4` row-major in canonical edge order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeFeatures {
    pub values: Vec<f64>,
    /// Mean of each raw class before normalisation.
    pub means: [f64; N_FEATURES],
}

impl EdgeFeatures {
    pub fn n_edges(&self) -> usize {
        self.values.len() / N_FEATURES
    }

    pub fn edge(&self, e: usize) -> &[f64] {
        &self.values[e * N_FEATURES..(e + 1) * N_FEATURES]
    }
}

/// Raw (unnormalised) residuals for one iteration. `node` holds the
/// per-variable class before broadcasting.
#[derive(Clone, Debug, Default)]
pub(crate) struct RawFeatures {
    pub edge: [Vec<f64>; 3],
    pub node: Vec<f64>,
}

impl RawFeatures {
    pub fn fill(
        &mut self,
        c2v: &[f64],
        prev_c2v: &[f64],
        v2c: &[f64],
        prev_v2c: &[f64],
        h: &[f64],
        prev_h: &[f64],
    ) {
        let [a, b, c] = &mut self.edge;
        a.clear();
        a.extend(c2v.iter().map(|m| m.abs()));
        b.clear();
        b.extend(c2v.iter().zip(prev_c2v).map(|(x, y)| (x - y).abs()));
        c.clear();
        c.extend(v2c.iter().zip(prev_v2c).map(|(x, y)| (x - y).abs()));
        self.node.clear();
        self.node
            .extend(h.iter().zip(prev_h).map(|(x, y)| (x - y).abs()));
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Normalises and interleaves raw residuals into `out`.
pub(crate) fn normalize_into(
    graph: &TannerGraph,
    raw: &RawFeatures,
    eps: f64,
    out: &mut EdgeFeatures,
) {
    let n_edges = graph.n_edges();
    let means = [
        mean(&raw.edge[0]),
        mean(&raw.edge[1]),
        mean(&raw.edge[2]),
        mean(&raw.node),
    ];
    out.means = means;
    out.values.clear();
    out.values.resize(n_edges * N_FEATURES, 0.0);
    let scale = |k: usize, x: f64| if means[k] > eps { x / means[k] } else { x };
    for e in 0..n_edges {
        let row = &mut out.values[e * N_FEATURES..(e + 1) * N_FEATURES];
        row[0] = scale(0, raw.edge[0][e]);
        row[1] = scale(1, raw.edge[1][e]);
        row[2] = scale(2, raw.edge[2][e]);
        row[3] = scale(3, raw.node[graph.edge_var(e)]);
    }
}

/// Features of the current iteration. Expects the check phase of
/// iteration `t` to have run, so `mu_c2v` is current while `mu_v2c` and `h`
/// still hold iteration `t − 1`.
pub fn build_features(
    state: &DecoderState,
    graph: &TannerGraph,
    cfg: &EwgnnConfig,
) -> EdgeFeatures {
    let mut raw = RawFeatures::default();
    raw.fill(
        &state.mu_c2v,
        &state.prev_mu_c2v,
        &state.mu_v2c,
        &state.prev_mu_v2c,
        &state.h,
        &state.prev_h,
    );
    let mut out = EdgeFeatures::default();
    normalize_into(graph, &raw, cfg.normalization_epsilon, &mut out);
    out
}

/// Anything that maps edge features to per-edge weights.
pub trait EdgeWeights: Sync {
    fn eval_weights(&self, features: &EdgeFeatures, out: &mut Vec<f64>);
}

impl EdgeWeights for FnnKernel {
    fn eval_weights(&self, features: &EdgeFeatures, out: &mut Vec<f64>) {
        out.resize(features.n_edges(), 0.0);
        self.forward_batch(&features.values, out);
    }
}

impl EdgeWeights for FnnModel {
    fn eval_weights(&self, features: &EdgeFeatures, out: &mut Vec<f64>) {
        FnnKernel::new(self).eval_weights(features, out)
    }
}

/// The same weight on every edge; `ConstantWeight(1.0)` turns the decoder
/// into clipped BP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantWeight(pub f64);

impl EdgeWeights for ConstantWeight {
    fn eval_weights(&self, features: &EdgeFeatures, out: &mut Vec<f64>) {
        out.clear();
        out.resize(features.n_edges(), self.0);
    }
}

/// `w_e = g_θ(x_e)` for every edge.
pub fn weight_eval(model: &impl EdgeWeights, features: &EdgeFeatures) -> Vec<f64> {
    let mut out = Vec::new();
    model.eval_weights(features, &mut out);
    out
}

/// Advances `state` by one iteration and returns the edge weights used.
pub fn decode_iteration(
    state: &mut DecoderState,
    graph: &TannerGraph,
    llr: &[f64],
    model: &(impl EdgeWeights + ?Sized),
    cfg: &EwgnnConfig,
) -> Vec<f64> {
    let mut ws = IterScratch::default();
    iterate(state, graph, llr, model, cfg, &mut ws);
    ws.weights
}

#[derive(Default)]
struct IterScratch {
    check: Scratch,
    raw: RawFeatures,
    features: EdgeFeatures,
    weights: Vec<f64>,
}

fn iterate(
    state: &mut DecoderState,
    graph: &TannerGraph,
    llr: &[f64],
    model: &(impl EdgeWeights + ?Sized),
    cfg: &EwgnnConfig,
    ws: &mut IterScratch,
) {
    state.check_phase(graph, cfg.alpha, &mut ws.check);
    ws.raw.fill(
        &state.mu_c2v,
        &state.prev_mu_c2v,
        &state.mu_v2c,
        &state.prev_mu_v2c,
        &state.h,
        &state.prev_h,
    );
    normalize_into(graph, &ws.raw, cfg.normalization_epsilon, &mut ws.features);
    model.eval_weights(&ws.features, &mut ws.weights);
    state.variable_phase(graph, llr, Some(&ws.weights));
    state.posterior_phase(graph, llr, Some(&ws.weights));
    state.t += 1;
}

/// Runs `cfg.iterations` iterations and reads out `ĉ_i = [h_i ≤ 0]`.
pub fn ewgnn_decode(
    graph: &TannerGraph,
    llr: &[f64],
    model: &(impl EdgeWeights + ?Sized),
    cfg: &EwgnnConfig,
) -> Result<DecodeResult, EwgnnError> {
    ewgnn_decode_observed(graph, llr, model, cfg, |_, _| {})
}

/// [`ewgnn_decode`] that also returns `h` after every iteration.
pub fn ewgnn_decode_with_history(
    graph: &TannerGraph,
    llr: &[f64],
    model: &(impl EdgeWeights + ?Sized),
    cfg: &EwgnnConfig,
) -> Result<(DecodeResult, Vec<Vec<f64>>), EwgnnError> {
    let mut history = Vec::with_capacity(cfg.iterations);
    let res = ewgnn_decode_observed(graph, llr, model, cfg, |s, _| history.push(s.h.clone()))?;
    Ok((res, history))
}

/// [`ewgnn_decode`] calling `observer(state, weights)` after every
/// iteration.
pub fn ewgnn_decode_observed(
    graph: &TannerGraph,
    llr: &[f64],
    model: &(impl EdgeWeights + ?Sized),
    cfg: &EwgnnConfig,
    mut observer: impl FnMut(&DecoderState, &[f64]),
) -> Result<DecodeResult, EwgnnError> {
    cfg.validate()?;
    let mut state = DecoderState::new(graph, llr)?;
    let mut ws = IterScratch::default();
    for _ in 0..cfg.iterations {
        iterate(&mut state, graph, llr, model, cfg, &mut ws);
        observer(&state, &ws.weights);
    }
    let t = state.t;
    Ok(DecodeResult::from_posterior(graph, state.h, t))
}

/// Per-bit cross-entropy of `h` against bit `c`, with `Pr(c = 1) = 1/(1 + eʰ)`.
#[inline]
pub fn bit_loss(h: f64, c: u8) -> f64 {
    if c == 1 {
        softplus(h)
    } else {
        softplus(-h)
    }
}

/// Cross-entropy averaged over every bit of every iteration.
pub fn multiloss(history: &[Vec<f64>], c: &[u8]) -> Result<f64, EwgnnError> {
    if history.is_empty() {
        return Err(EwgnnError::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let mut total = 0.0;
    for h in history {
        if h.len() != c.len() {
            return Err(EwgnnError::LengthMismatch {
                expected: c.len(),
                actual: h.len(),
            });
        }
        total += h.iter().zip(c).map(|(&x, &b)| bit_loss(x, b)).sum::<f64>();
    }
    Ok(total / (c.len() * history.len()) as f64)
}
