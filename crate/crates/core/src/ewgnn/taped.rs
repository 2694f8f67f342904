//! The unrolled decoder recorded on the scalar tape. Slow; serves as the
//! reference for [`super::loss_and_gradient`].

use super::{EwgnnConfig, EwgnnError};
use crate::msgpass::DecodeError;
use crate::neural::{FnnModel, Tape, Var};
use crate::tanner::TannerGraph;

fn mean(tape: &mut Tape, xs: &[Var]) -> Var {
    let s = tape.sum(xs);
    let n = tape.constant(xs.len() as f64);
    tape.div(s, n)
}

fn normalized(tape: &mut Tape, xs: &[Var], eps: f64) -> Vec<Var> {
    let m = mean(tape, xs);
    if tape.value(m) > eps {
        xs.iter().map(|&x| tape.div(x, m)).collect()
    } else {
        xs.to_vec()
    }
}

/// Clipped check phase on the tape, with the same prefix/suffix products
/// as the numeric decoder.
pub(crate) fn taped_check_phase(
    tape: &mut Tape,
    graph: &TannerGraph,
    v2c: &[Var],
    alpha: f64,
) -> Vec<Var> {
    let half = tape.constant(0.5);
    let one = tape.constant(1.0);
    let tau: Vec<Var> = v2c
        .iter()
        .map(|&m| {
            let x = tape.mul(half, m);
            tape.tanh(x)
        })
        .collect();
    let mut c2v = vec![one; graph.n_edges()];
    for j in 0..graph.n_chk() {
        let edges = graph.check_edges(j);
        let d = edges.len();
        let mut prefix = vec![one; d + 1];
        let mut suffix = vec![one; d + 1];
        for k in 0..d {
            prefix[k + 1] = tape.mul(prefix[k], tau[edges.start + k]);
        }
        for k in (0..d).rev() {
            suffix[k] = tape.mul(suffix[k + 1], tau[edges.start + k]);
        }
        for k in 0..d {
            let p = tape.mul(prefix[k], suffix[k + 1]);
            let a = tape.add(one, p);
            let b = tape.sub(one, p);
            let a = tape.clip(a, alpha);
            let b = tape.clip(b, alpha);
            let la = tape.ln(a);
            let lb = tape.ln(b);
            c2v[edges.start + k] = tape.sub(la, lb);
        }
    }
    c2v
}

/// Multiloss of one frame and its gradient with respect to the flat
/// parameters of `model`.
pub fn loss_and_gradient_taped(
    graph: &TannerGraph,
    llr: &[f64],
    codeword: &[u8],
    model: &FnnModel,
    cfg: &EwgnnConfig,
) -> Result<(f64, Vec<f64>), EwgnnError> {
    cfg.validate()?;
    let (n, n_edges) = (graph.n_var(), graph.n_edges());
    for len in [llr.len(), codeword.len()] {
        if len != n {
            return Err(DecodeError::SizeMismatch {
                expected: n,
                actual: len,
            }
            .into());
        }
    }
    let mut tape = Tape::new();
    let params = model.param_vars(&mut tape);
    let s: Vec<Var> = llr.iter().map(|&x| tape.constant(x)).collect();
    let zero = tape.constant(0.0);

    let mut v2c: Vec<Var> = (0..n_edges).map(|e| s[graph.edge_var(e)]).collect();
    let mut v2c_prev = v2c.clone();
    let mut c2v_prev = vec![zero; n_edges];
    let mut h = s.clone();
    let mut h_prev = s.clone();
    let mut losses = Vec::new();

    for _ in 0..cfg.iterations {
        let c2v = taped_check_phase(&mut tape, graph, &v2c, cfg.alpha);

        let eps = cfg.normalization_epsilon;
        let r1: Vec<Var> = c2v.iter().map(|&m| tape.abs(m)).collect();
        let r2: Vec<Var> = (0..n_edges)
            .map(|e| {
                let d = tape.sub(c2v[e], c2v_prev[e]);
                tape.abs(d)
            })
            .collect();
        let r3: Vec<Var> = (0..n_edges)
            .map(|e| {
                let d = tape.sub(v2c[e], v2c_prev[e]);
                tape.abs(d)
            })
            .collect();
        let r4: Vec<Var> = (0..n)
            .map(|i| {
                let d = tape.sub(h[i], h_prev[i]);
                tape.abs(d)
            })
            .collect();
        let (x1, x2, x3, x4) = (
            normalized(&mut tape, &r1, eps),
            normalized(&mut tape, &r2, eps),
            normalized(&mut tape, &r3, eps),
            normalized(&mut tape, &r4, eps),
        );
        let w: Vec<Var> = (0..n_edges)
            .map(|e| {
                let x = [x1[e], x2[e], x3[e], x4[graph.edge_var(e)]];
                model.forward_taped(&mut tape, &params, &x)
            })
            .collect();

        let mut v2c_new = vec![zero; n_edges];
        let mut h_new = vec![zero; n];
        for i in 0..n {
            let edges = graph.var_edges(i);
            for &e in edges {
                let mut acc = s[i];
                for &o in edges.iter().filter(|&&o| o != e) {
                    let term = tape.mul(w[o], c2v[o]);
                    acc = tape.add(acc, term);
                }
                v2c_new[e] = acc;
            }
            let mut acc = s[i];
            for &e in edges {
                let term = tape.mul(w[e], c2v[e]);
                acc = tape.add(acc, term);
            }
            h_new[i] = acc;
        }

        for i in 0..n {
            let arg = if codeword[i] == 1 {
                h_new[i]
            } else {
                tape.sub(zero, h_new[i])
            };
            losses.push(tape.softplus(arg));
        }

        v2c_prev = std::mem::replace(&mut v2c, v2c_new);
        c2v_prev = c2v;
        h_prev = std::mem::replace(&mut h, h_new);
    }
    let total = tape.sum(&losses);
    let count = tape.constant(losses.len() as f64);
    let loss = tape.div(total, count);
    let grads = tape.backward(loss).expect("tape holds no opaque nodes");
    Ok((
        tape.value(loss),
        params.iter().map(|&p| grads.wrt(p)).collect(),
    ))
}
