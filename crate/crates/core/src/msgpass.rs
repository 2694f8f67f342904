//! Flooding-schedule belief propagation on a Tanner graph, its neural-BP
//! variant with tied per-edge weights, and the shared node kernels.
//!
//! All LLRs follow the convention `ln Pr(c=0)/Pr(c=1)`: positive means the
//! bit is more likely zero.

use thiserror::Error;

use crate::tanner::TannerGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("tanh product {0} is outside (-1, 1); use the clipped kernel")]
    Saturation(f64),
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("at least one decoding iteration is required")]
    ZeroIterations,
}

/// `f_c(x, α)`: clamps `x` into `[α, 2 − α]`.
#[inline]
pub fn clip(x: f64, alpha: f64) -> f64 {
    if x > 2.0 - alpha {
        2.0 - alpha
    } else if x < alpha {
        alpha
    } else {
        x
    }
}

/// Check message from the product `P` of `tanh(μ/2)` over the extrinsic
/// inputs: `ln(f_c(1 + P) / f_c(1 − P))`, evaluated as a difference of
/// logarithms so that negating `P` negates the result exactly.
#[inline]
pub fn clipped_from_product(p: f64, alpha: f64) -> f64 {
    clip(1.0 + p, alpha).ln() - clip(1.0 - p, alpha).ln()
}

/// `2·atanh(∏ tanh(m/2))` over the given (already extrinsic) messages.
pub fn check_update_exact(incoming: &[f64]) -> Result<f64, DecodeError> {
    let p: f64 = incoming.iter().map(|&m| (0.5 * m).tanh()).product();
    if p.abs() >= 1.0 {
        return Err(DecodeError::Saturation(p));
    }
    Ok(2.0 * p.atanh())
}

/// Totalised check update. Output magnitude never exceeds `ln((2 − α)/α)`.
pub fn check_update_clipped(incoming: &[f64], alpha: f64) -> f64 {
    let p: f64 = incoming.iter().map(|&m| (0.5 * m).tanh()).product();
    clipped_from_product(p, alpha)
}

/// `s + Σ w·μ` over the supplied (extrinsic) neighbours.
pub fn variable_update(channel_llr: f64, incoming: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    incoming
        .into_iter()
        .fold(channel_llr, |acc, (msg, w)| acc + w * msg)
}

/// `s + Σ w·μ` over the full neighbourhood. Same arithmetic as
/// [`variable_update`]; kept separate because the caller passes every
/// neighbour rather than the extrinsic set.
pub fn posterior(channel_llr: f64, incoming: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    variable_update(channel_llr, incoming)
}

/// 1 when `llr ≤ 0`, else 0.
#[inline]
pub fn hard_decision(llr: f64) -> u8 {
    u8::from(llr <= 0.0)
}

/// Messages and embeddings of an in-progress decode, plus the previous
/// iteration's copies.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub mu_c2v: Vec<f64>,
    pub mu_v2c: Vec<f64>,
    pub h: Vec<f64>,
    pub prev_mu_c2v: Vec<f64>,
    pub prev_mu_v2c: Vec<f64>,
    pub prev_h: Vec<f64>,
    pub t: usize,
}

impl DecoderState {
    /// Variable-to-check messages and embeddings start at the channel LLRs,
    /// check-to-variable messages at zero, previous copies equal current.
    pub fn new(graph: &TannerGraph, llr: &[f64]) -> Result<Self, DecodeError> {
        if llr.len() != graph.n_var() {
            return Err(DecodeError::SizeMismatch {
                expected: graph.n_var(),
                actual: llr.len(),
            });
        }
        let mu_v2c: Vec<f64> = (0..graph.n_edges())
            .map(|e| llr[graph.edge_var(e)])
            .collect();
        let mu_c2v = vec![0.0; graph.n_edges()];
        Ok(Self {
            prev_mu_c2v: mu_c2v.clone(),
            prev_mu_v2c: mu_v2c.clone(),
            prev_h: llr.to_vec(),
            h: llr.to_vec(),
            mu_c2v,
            mu_v2c,
            t: 0,
        })
    }

    /// Rotates `mu_c2v` into `prev_mu_c2v` and recomputes it from `mu_v2c`.
    pub(crate) fn check_phase(&mut self, graph: &TannerGraph, alpha: f64, scratch: &mut Scratch) {
        std::mem::swap(&mut self.mu_c2v, &mut self.prev_mu_c2v);
        check_phase(graph, &self.mu_v2c, alpha, &mut self.mu_c2v, scratch);
    }

    pub(crate) fn variable_phase(&mut self, graph: &TannerGraph, llr: &[f64], w: Option<&[f64]>) {
        std::mem::swap(&mut self.mu_v2c, &mut self.prev_mu_v2c);
        variable_phase(graph, llr, &self.mu_c2v, w, &mut self.mu_v2c);
    }

    pub(crate) fn posterior_phase(&mut self, graph: &TannerGraph, llr: &[f64], w: Option<&[f64]>) {
        std::mem::swap(&mut self.h, &mut self.prev_h);
        posterior_phase(graph, llr, &self.mu_c2v, w, &mut self.h);
    }
}

/// Reusable buffers for the per-check prefix/suffix products.
#[derive(Default)]
pub(crate) struct Scratch {
    pub tanh: Vec<f64>,
    pub prefix: Vec<f64>,
    pub suffix: Vec<f64>,
}

/// All check-to-variable messages from the variable-to-check messages.
///
/// The extrinsic product for position `k` of a check is
/// `prefix[k] · suffix[k + 1]`, so no division by a tanh term is needed.
pub(crate) fn check_phase(
    graph: &TannerGraph,
    v2c: &[f64],
    alpha: f64,
    c2v: &mut [f64],
    scratch: &mut Scratch,
) {
    for j in 0..graph.n_chk() {
        let edges = graph.check_edges(j);
        let d = edges.len();
        fill_products(&v2c[edges.clone()], scratch);
        for k in 0..d {
            let p = scratch.prefix[k] * scratch.suffix[k + 1];
            c2v[edges.start + k] = clipped_from_product(p, alpha);
        }
    }
}

/// `tanh[k] = tanh(m_k/2)`, `prefix[k] = ∏_{i<k}`, `suffix[k] = ∏_{i≥k}`.
pub(crate) fn fill_products(msgs: &[f64], scratch: &mut Scratch) {
    let d = msgs.len();
    scratch.tanh.clear();
    scratch.tanh.extend(msgs.iter().map(|&m| (0.5 * m).tanh()));
    scratch.prefix.clear();
    scratch.prefix.resize(d + 1, 1.0);
    scratch.suffix.clear();
    scratch.suffix.resize(d + 1, 1.0);
    for k in 0..d {
        scratch.prefix[k + 1] = scratch.prefix[k] * scratch.tanh[k];
    }
    for k in (0..d).rev() {
        scratch.suffix[k] = scratch.suffix[k + 1] * scratch.tanh[k];
    }
}

#[inline]
fn weighted(c2v: &[f64], w: Option<&[f64]>, e: usize) -> (f64, f64) {
    (c2v[e], w.map_or(1.0, |w| w[e]))
}

pub(crate) fn variable_phase(
    graph: &TannerGraph,
    llr: &[f64],
    c2v: &[f64],
    w: Option<&[f64]>,
    v2c: &mut [f64],
) {
    for (i, &s) in llr.iter().enumerate() {
        let edges = graph.var_edges(i);
        for &e in edges {
            v2c[e] = variable_update(
                s,
                edges
                    .iter()
                    .filter(|&&other| other != e)
                    .map(|&other| weighted(c2v, w, other)),
            );
        }
    }
}

pub(crate) fn posterior_phase(
    graph: &TannerGraph,
    llr: &[f64],
    c2v: &[f64],
    w: Option<&[f64]>,
    h: &mut [f64],
) {
    for (i, &s) in llr.iter().enumerate() {
        h[i] = posterior(s, graph.var_edges(i).iter().map(|&e| weighted(c2v, w, e)));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub c_hat: Vec<u8>,
    pub posterior: Vec<f64>,
    pub iterations_run: usize,
    pub syndrome_ok: bool,
}

impl DecodeResult {
    pub(crate) fn from_posterior(
        graph: &TannerGraph,
        posterior: Vec<f64>,
        iterations: usize,
    ) -> Self {
        let c_hat: Vec<u8> = posterior.iter().map(|&l| hard_decision(l)).collect();
        Self {
            syndrome_ok: graph.satisfies_checks(&c_hat),
            c_hat,
            posterior,
            iterations_run: iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub early_stop: bool,
}

impl BpConfig {
    pub fn new(iterations: usize, alpha: f64) -> Self {
        Self {
            iterations,
            alpha,
            early_stop: false,
        }
    }

    pub fn with_early_stop(mut self, early_stop: bool) -> Self {
        self.early_stop = early_stop;
        self
    }
}

/// Clipped-kernel BP. The posterior is refreshed every iteration so that
/// `h` in the observed state is the a-posteriori LLR at that iteration.
pub fn bp_decode(
    graph: &TannerGraph,
    llr: &[f64],
    cfg: &BpConfig,
) -> Result<DecodeResult, DecodeError> {
    bp_decode_observed(graph, llr, cfg, |_| {})
}

/// [`bp_decode`] calling `observer` with the state after every iteration.
pub fn bp_decode_observed(
    graph: &TannerGraph,
    llr: &[f64],
    cfg: &BpConfig,
    observer: impl FnMut(&DecoderState),
) -> Result<DecodeResult, DecodeError> {
    run_weighted(graph, llr, cfg, None, None, observer)
}

/// Neural BP weights, shared by every iteration: `w_edge[e]` scales the
/// check message on edge `e` in variable updates and `w_out[e]` scales it in
/// the posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct NbpWeights {
    pub w_edge: Vec<f64>,
    pub w_out: Vec<f64>,
}

impl NbpWeights {
    /// All-ones weights, which reduce NBP to BP.
    pub fn ones(n_edges: usize) -> Self {
        Self {
            w_edge: vec![1.0; n_edges],
            w_out: vec![1.0; n_edges],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w_edge.len() + self.w_out.len()
    }

    pub fn n_edges(&self) -> usize {
        self.w_edge.len()
    }

    /// `w_edge` followed by `w_out`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.w_edge.iter().chain(&self.w_out).copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self, DecodeError> {
        if flat.len() % 2 != 0 {
            return Err(DecodeError::SizeMismatch {
                expected: flat.len() + 1,
                actual: flat.len(),
            });
        }
        let (a, b) = flat.split_at(flat.len() / 2);
        Ok(Self {
            w_edge: a.to_vec(),
            w_out: b.to_vec(),
        })
    }

    fn check_size(&self, graph: &TannerGraph) -> Result<(), DecodeError> {
        let e = graph.n_edges();
        for len in [self.w_edge.len(), self.w_out.len()] {
            if len != e {
                return Err(DecodeError::SizeMismatch {
                    expected: 2 * e,
                    actual: self.n_params(),
                });
            }
        }
        Ok(())
    }
}

pub fn nbp_decode(
    graph: &TannerGraph,
    llr: &[f64],
    cfg: &BpConfig,
    weights: &NbpWeights,
) -> Result<DecodeResult, DecodeError> {
    nbp_decode_observed(graph, llr, cfg, weights, |_| {})
}

pub fn nbp_decode_observed(
    graph: &TannerGraph,
    llr: &[f64],
    cfg: &BpConfig,
    weights: &NbpWeights,
    observer: impl FnMut(&DecoderState),
) -> Result<DecodeResult, DecodeError> {
    weights.check_size(graph)?;
    run_weighted(
        graph,
        llr,
        cfg,
        Some(&weights.w_edge),
        Some(&weights.w_out),
        observer,
    )
}

fn run_weighted(
    graph: &TannerGraph,
    llr: &[f64],
    cfg: &BpConfig,
    w_edge: Option<&[f64]>,
    w_out: Option<&[f64]>,
    mut observer: impl FnMut(&DecoderState),
) -> Result<DecodeResult, DecodeError> {
    if cfg.iterations == 0 {
        return Err(DecodeError::ZeroIterations);
    }
    let mut state = DecoderState::new(graph, llr)?;
    let mut scratch = Scratch::default();
    let mut hard = vec![0u8; graph.n_var()];
    for t in 1..=cfg.iterations {
        state.check_phase(graph, cfg.alpha, &mut scratch);
        state.variable_phase(graph, llr, w_edge);
        state.posterior_phase(graph, llr, w_out);
        state.t = t;
        observer(&state);
        if cfg.early_stop {
            for (b, &l) in hard.iter_mut().zip(&state.h) {
                *b = hard_decision(l);
            }
            if graph.satisfies_checks(&hard) {
                break;
            }
        }
    }
    let t = state.t;
    Ok(DecodeResult::from_posterior(graph, state.h, t))
}
