//! Hand-derived reverse pass of the unrolled decoder.
//!
//! The forward pass mirrors [`super::ewgnn_decode`] operation for
//! operation and keeps every intermediate; the backward pass walks the
//! iterations in reverse. Derivative conventions match the scalar tape:
//! `|x|' = 0` at 0, and the clip has slope 1 strictly inside `(α, 2 − α)`.

use super::{
    bit_loss, normalize_into, EdgeFeatures, EwgnnConfig, EwgnnError, RawFeatures, N_FEATURES,
};
use crate::msgpass::{
    check_phase, fill_products, posterior_phase, variable_phase, DecodeError, Scratch,
};
use crate::neural::{sigmoid, FnnKernel, FnnTrace};
use crate::tanner::TannerGraph;

/// Buffers reused across frames. Index 0 of each trajectory holds the
/// initial state.
#[derive(Default)]
pub struct GradWorkspace {
    v2c: Vec<Vec<f64>>,
    c2v: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    raw: Vec<RawFeatures>,
    features: Vec<EdgeFeatures>,
    traces: Vec<FnnTrace>,
    weights: Vec<Vec<f64>>,
    g_v2c: Vec<Vec<f64>>,
    g_c2v: Vec<Vec<f64>>,
    g_h: Vec<Vec<f64>>,
    g_w: Vec<f64>,
    g_x: Vec<f64>,
    g_node: Vec<f64>,
    check: Scratch,
}

fn reset(bufs: &mut Vec<Vec<f64>>, count: usize, len: usize) {
    bufs.resize(count, Vec::new());
    for b in bufs.iter_mut() {
        b.clear();
        b.resize(len, 0.0);
    }
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `d ln f_c(x) / dx`: `1/x` strictly inside the clip range, 0 outside.
#[inline]
fn log_clip_slope(x: f64, alpha: f64) -> f64 {
    if x > alpha && x < 2.0 - alpha {
        1.0 / x
    } else {
        0.0
    }
}

/// Multiloss of one frame, adding its parameter gradient into `grad`.
///
/// `codeword` is the transmitted word the embeddings are scored against.
pub fn loss_and_gradient(
    graph: &TannerGraph,
    llr: &[f64],
    codeword: &[u8],
    kernel: &FnnKernel,
    cfg: &EwgnnConfig,
    ws: &mut GradWorkspace,
    grad: &mut [f64],
) -> Result<f64, EwgnnError> {
    cfg.validate()?;
    let (n, n_edges, iters) = (graph.n_var(), graph.n_edges(), cfg.iterations);
    for (len, expected) in [
        (llr.len(), n),
        (codeword.len(), n),
        (grad.len(), kernel.n_params()),
    ] {
        if len != expected {
            return Err(DecodeError::SizeMismatch {
                expected,
                actual: len,
            }
            .into());
        }
    }
    let eps = cfg.normalization_epsilon;

    reset(&mut ws.v2c, iters + 1, n_edges);
    reset(&mut ws.c2v, iters + 1, n_edges);
    reset(&mut ws.h, iters + 1, n);
    ws.raw.resize(iters + 1, RawFeatures::default());
    ws.features.resize(iters + 1, EdgeFeatures::default());
    ws.traces.resize(iters + 1, FnnTrace::default());
    reset(&mut ws.weights, iters + 1, n_edges);
    for e in 0..n_edges {
        ws.v2c[0][e] = llr[graph.edge_var(e)];
    }
    ws.h[0].copy_from_slice(llr);

    // Forward.
    let mut loss = 0.0;
    for t in 1..=iters {
        let back2 = t.saturating_sub(2);
        let (done, rest) = ws.c2v.split_at_mut(t);
        check_phase(
            graph,
            &ws.v2c[t - 1],
            cfg.alpha,
            &mut rest[0],
            &mut ws.check,
        );
        let c2v = &rest[0];
        ws.raw[t].fill(
            c2v,
            &done[t - 1],
            &ws.v2c[t - 1],
            &ws.v2c[back2],
            &ws.h[t - 1],
            &ws.h[back2],
        );
        normalize_into(graph, &ws.raw[t], eps, &mut ws.features[t]);
        kernel.forward_batch_traced(&ws.features[t].values, &mut ws.traces[t]);
        ws.weights[t].copy_from_slice(ws.traces[t].acts.last().unwrap());
        let w = Some(ws.weights[t].as_slice());
        variable_phase(graph, llr, c2v, w, &mut ws.v2c[t]);
        posterior_phase(graph, llr, c2v, w, &mut ws.h[t]);
        loss += ws.h[t]
            .iter()
            .zip(codeword)
            .map(|(&x, &b)| bit_loss(x, b))
            .sum::<f64>();
    }
    loss /= (n * iters) as f64;
    let scale = 1.0 / (n * iters) as f64;

    // Backward.
    reset(&mut ws.g_v2c, iters + 1, n_edges);
    reset(&mut ws.g_c2v, iters + 1, n_edges);
    reset(&mut ws.g_h, iters + 1, n);
    for t in 1..=iters {
        for ((g, &x), &b) in ws.g_h[t].iter_mut().zip(&ws.h[t]).zip(codeword) {
            *g = scale * (sigmoid(x) - if b == 1 { 0.0 } else { 1.0 });
        }
    }
    ws.g_w.resize(n_edges, 0.0);
    ws.g_x.resize(n_edges * N_FEATURES, 0.0);
    ws.g_node.resize(n, 0.0);

    for t in (1..=iters).rev() {
        // Variable and posterior phases.
        {
            let (c2v, w) = (&ws.c2v[t], &ws.weights[t]);
            let (g_v2c, g_h) = (&ws.g_v2c[t], &ws.g_h[t]);
            let g_c2v = &mut ws.g_c2v[t];
            for i in 0..n {
                let edges = graph.var_edges(i);
                let base = g_h[i] + edges.iter().map(|&e| g_v2c[e]).sum::<f64>();
                for &e in edges {
                    let coef = base - g_v2c[e];
                    ws.g_w[e] = c2v[e] * coef;
                    g_c2v[e] += w[e] * coef;
                }
            }
        }

        // Network.
        kernel.backward_batch(&ws.traces[t], &ws.g_w, grad, &mut ws.g_x);

        // Mean normalisation, then the absolute values.
        let raw = &ws.raw[t];
        let means = ws.features[t].means;
        let back1 = t - 1;
        let back2 = t.saturating_sub(2);
        for k in 0..3 {
            let m = means[k];
            let dot = if m > eps {
                (0..n_edges)
                    .map(|e| ws.g_x[e * N_FEATURES + k] * raw.edge[k][e])
                    .sum::<f64>()
            } else {
                0.0
            };
            for e in 0..n_edges {
                let gx = ws.g_x[e * N_FEATURES + k];
                let g = if m > eps {
                    gx / m - dot / (m * m * n_edges as f64)
                } else {
                    gx
                };
                if g == 0.0 {
                    continue;
                }
                match k {
                    0 => ws.g_c2v[t][e] += g * sgn(ws.c2v[t][e]),
                    1 => {
                        let s = g * sgn(ws.c2v[t][e] - ws.c2v[back1][e]);
                        ws.g_c2v[t][e] += s;
                        if back1 >= 1 {
                            ws.g_c2v[back1][e] -= s;
                        }
                    }
                    _ => {
                        if back1 >= 1 {
                            let s = g * sgn(ws.v2c[back1][e] - ws.v2c[back2][e]);
                            ws.g_v2c[back1][e] += s;
                            if back2 >= 1 {
                                ws.g_v2c[back2][e] -= s;
                            }
                        }
                    }
                }
            }
        }
        if back1 >= 1 {
            let m = means[3];
            ws.g_node.iter_mut().for_each(|g| *g = 0.0);
            let mut dot = 0.0;
            for e in 0..n_edges {
                let gx = ws.g_x[e * N_FEATURES + 3];
                ws.g_node[graph.edge_var(e)] += gx;
                dot += gx * raw.node[graph.edge_var(e)];
            }
            for i in 0..n {
                let g = if m > eps {
                    ws.g_node[i] / m - dot / (m * m * n as f64)
                } else {
                    ws.g_node[i]
                };
                let s = g * sgn(ws.h[back1][i] - ws.h[back2][i]);
                ws.g_h[back1][i] += s;
                if back2 >= 1 {
                    ws.g_h[back2][i] -= s;
                }
            }
        }

        // Check phase.
        if back1 >= 1 {
            let (lower, upper) = ws.g_v2c.split_at_mut(t);
            let _ = upper;
            let g_v2c = &mut lower[back1];
            let g_c2v = &ws.g_c2v[t];
            let v2c = &ws.v2c[back1];
            let sc = &mut ws.check;
            let mut g_p = Vec::new();
            for j in 0..graph.n_chk() {
                let edges = graph.check_edges(j);
                let d = edges.len();
                fill_products(&v2c[edges.clone()], sc);
                g_p.clear();
                for k in 0..d {
                    let p = sc.prefix[k] * sc.suffix[k + 1];
                    let (a, b) = (1.0 + p, 1.0 - p);
                    let slope = log_clip_slope(a, cfg.alpha) + log_clip_slope(b, cfg.alpha);
                    g_p.push(g_c2v[edges.start + k] * slope);
                }
                // Running sums of g_p[e]·∏_{e' ≠ e} τ over a prefix (left)
                // and a suffix (right) of the check's edges.
                let mut right = vec![0.0; d + 1];
                for k in (0..d).rev() {
                    right[k] = right[k + 1] * sc.tanh[k] + g_p[k] * sc.suffix[k + 1];
                }
                let mut left = 0.0;
                for k in 0..d {
                    let g_tau = left * sc.suffix[k + 1] + sc.prefix[k] * right[k + 1];
                    let tau = sc.tanh[k];
                    g_v2c[edges.start + k] += g_tau * 0.5 * (1.0 - tau * tau);
                    left = left * tau + g_p[k] * sc.prefix[k];
                }
            }
        }
    }
    Ok(loss)
}
