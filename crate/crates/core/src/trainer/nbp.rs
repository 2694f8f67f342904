//! Loss and gradient of neural BP, recorded on the scalar tape.

use crate::ewgnn::taped::taped_check_phase;
use crate::ewgnn::EwgnnError;
use crate::msgpass::{DecodeError, NbpWeights};
use crate::neural::{Tape, Var};
use crate::tanner::TannerGraph;

/// Cross-entropy of the final posterior (or of every iteration's posterior
/// when `multiloss` is set) and its gradient with respect to
/// `[w_edge, w_out]`.
pub fn nbp_loss_and_gradient(
    graph: &TannerGraph,
    llr: &[f64],
    codeword: &[u8],
    weights: &NbpWeights,
    alpha: f64,
    iterations: usize,
    multiloss: bool,
) -> Result<(f64, Vec<f64>), EwgnnError> {
    let (n, n_edges) = (graph.n_var(), graph.n_edges());
    for (len, expected) in [
        (llr.len(), n),
        (codeword.len(), n),
        (weights.n_edges(), n_edges),
    ] {
        if len != expected {
            return Err(DecodeError::SizeMismatch {
                expected,
                actual: len,
            }
            .into());
        }
    }
    if iterations == 0 {
        return Err(DecodeError::ZeroIterations.into());
    }
    let mut tape = Tape::new();
    let w_edge: Vec<Var> = weights.w_edge.iter().map(|&w| tape.input(w)).collect();
    let w_out: Vec<Var> = weights.w_out.iter().map(|&w| tape.input(w)).collect();
    let s: Vec<Var> = llr.iter().map(|&x| tape.constant(x)).collect();
    let zero = tape.constant(0.0);
    let mut v2c: Vec<Var> = (0..n_edges).map(|e| s[graph.edge_var(e)]).collect();
    let mut losses = Vec::new();
    for t in 1..=iterations {
        let c2v = taped_check_phase(&mut tape, graph, &v2c, alpha);
        let mut next = vec![zero; n_edges];
        for i in 0..n {
            let edges = graph.var_edges(i);
            for &e in edges {
                let mut acc = s[i];
                for &o in edges.iter().filter(|&&o| o != e) {
                    let term = tape.mul(w_edge[o], c2v[o]);
                    acc = tape.add(acc, term);
                }
                next[e] = acc;
            }
            if multiloss || t == iterations {
                let mut h = s[i];
                for &e in edges {
                    let term = tape.mul(w_out[e], c2v[e]);
                    h = tape.add(h, term);
                }
                let arg = if codeword[i] == 1 {
                    h
                } else {
                    tape.sub(zero, h)
                };
                losses.push(tape.softplus(arg));
            }
        }
        v2c = next;
    }
    let total = tape.sum(&losses);
    let count = tape.constant(losses.len() as f64);
    let loss = tape.div(total, count);
    let grads = tape.backward(loss).expect("tape holds no opaque nodes");
    let grad = w_edge.iter().chain(&w_out).map(|&v| grads.wrt(v)).collect();
    Ok((tape.value(loss), grad))
}
