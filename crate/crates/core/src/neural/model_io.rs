//! Text model files.
//!
//! Edge-weight network:
//!
//! ```text
//! EWGNN v1
//! alpha <decimal>
//! elu_beta <decimal>
//! arch 4 32 32 1
//! W1 <out·in values, row-major>
//! b1 <out values>
//! ...
//! ```
//!
//! Neural BP weights use the same style with header `NBP v1`, an
//! `edges <E>` line and `w_edge` / `w_out` value lines. Every decimal is
//! written with 17 significant digits, which round-trips `f64` exactly.

use super::{FnnModel, NeuralError, CANONICAL_DIMS, CANONICAL_PARAMS};
use crate::msgpass::NbpWeights;

pub const MODEL_HEADER: &str = "EWGNN v1";
pub const NBP_HEADER: &str = "NBP v1";

fn fmt_values(tag: &str, values: &[f64]) -> String {
    let mut line = String::from(tag);
    for v in values {
        line.push(' ');
        line.push_str(&format!("{v:.16e}"));
    }
    line.push('\n');
    line
}

pub fn model_save(model: &FnnModel) -> String {
    let mut out = format!("{MODEL_HEADER}\n");
    out.push_str(&format!("alpha {:.16e}\n", model.alpha));
    out.push_str(&format!("elu_beta {:.16e}\n", model.elu_beta));
    let arch: Vec<String> = model.layer_dims().iter().map(|d| d.to_string()).collect();
    out.push_str(&format!("arch {}\n", arch.join(" ")));
    for l in 0..model.n_layers() {
        out.push_str(&fmt_values(&format!("W{}", l + 1), model.weights(l)));
        out.push_str(&fmt_values(&format!("b{}", l + 1), model.biases(l)));
    }
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> NeuralError {
        NeuralError::ParseError {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next non-blank line, split into its tag and the remaining tokens.
    fn tagged(&mut self, tag: &str) -> Result<Vec<&'a str>, NeuralError> {
        loop {
            let Some((i, text)) = self.lines.next() else {
                self.line += 1;
                return Err(self.err(format!("unexpected end of file, expected {tag:?}")));
            };
            self.line = i + 1;
            let mut toks = text.split_whitespace();
            match toks.next() {
                None => continue,
                Some(t) if t == tag => return Ok(toks.collect()),
                Some(t) => return Err(self.err(format!("expected {tag:?}, found {t:?}"))),
            }
        }
    }

    fn reals(&mut self, tag: &str) -> Result<Vec<f64>, NeuralError> {
        let toks = self.tagged(tag)?;
        toks.iter()
            .map(|t| {
                let v: f64 = t
                    .parse()
                    .map_err(|_| self.err(format!("invalid number {t:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.err(format!("non-finite value {t:?}")))
                }
            })
            .collect()
    }

    fn real(&mut self, tag: &str) -> Result<f64, NeuralError> {
        let v = self.reals(tag)?;
        if v.len() != 1 {
            return Err(self.err(format!("{tag} takes exactly one value")));
        }
        Ok(v[0])
    }

    fn header(&mut self, expected: &str) -> Result<(), NeuralError> {
        let first = self
            .lines
            .by_ref()
            .map(|(i, l)| (i, l.trim()))
            .find(|(_, l)| !l.is_empty());
        match first {
            Some((i, l)) if l == expected => {
                self.line = i + 1;
                Ok(())
            }
            other => Err(NeuralError::VersionMismatch(
                other.map(|(_, l)| l.to_string()).unwrap_or_default(),
            )),
        }
    }

    fn finish(&mut self) -> Result<(), NeuralError> {
        for (i, l) in self.lines.by_ref() {
            if !l.trim().is_empty() {
                self.line = i + 1;
                return Err(self.err("trailing data"));
            }
        }
        Ok(())
    }
}

pub fn model_load(text: &str) -> Result<FnnModel, NeuralError> {
    let mut r = Reader::new(text);
    r.header(MODEL_HEADER)?;
    let alpha = r.real("alpha")?;
    let elu_beta = r.real("elu_beta")?;
    let arch = r
        .tagged("arch")?
        .iter()
        .map(|t| t.parse::<usize>().ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| r.err("arch needs at least two positive layer widths"))?;
    let mut model = FnnModel::zeros(&arch, elu_beta, alpha);
    let mut total = 0;
    let mut layers = Vec::new();
    for l in 0..model.n_layers() {
        let w = r.reals(&format!("W{}", l + 1))?;
        let b = r.reals(&format!("b{}", l + 1))?;
        total += w.len() + b.len();
        layers.push((r.line, w, b));
    }
    r.finish()?;
    if arch == CANONICAL_DIMS && total != CANONICAL_PARAMS {
        return Err(NeuralError::CountMismatch {
            what: "canonical model parameters".into(),
            expected: CANONICAL_PARAMS,
            actual: total,
        });
    }
    for (l, (_, w, b)) in layers.into_iter().enumerate() {
        let (want_w, want_b) = (model.weights(l).len(), model.biases(l).len());
        if w.len() != want_w {
            return Err(NeuralError::CountMismatch {
                what: format!("W{}", l + 1),
                expected: want_w,
                actual: w.len(),
            });
        }
        if b.len() != want_b {
            return Err(NeuralError::CountMismatch {
                what: format!("b{}", l + 1),
                expected: want_b,
                actual: b.len(),
            });
        }
        model.weights_mut(l).copy_from_slice(&w);
        model.biases_mut(l).copy_from_slice(&b);
    }
    Ok(model)
}

pub fn nbp_save(weights: &NbpWeights, alpha: f64) -> String {
    let mut out = format!("{NBP_HEADER}\n");
    out.push_str(&format!("alpha {alpha:.16e}\n"));
    out.push_str(&format!("edges {}\n", weights.n_edges()));
    out.push_str(&fmt_values("w_edge", &weights.w_edge));
    out.push_str(&fmt_values("w_out", &weights.w_out));
    out
}

/// Returns the weights and the clip factor stored with them.
pub fn nbp_load(text: &str) -> Result<(NbpWeights, f64), NeuralError> {
    let mut r = Reader::new(text);
    r.header(NBP_HEADER)?;
    let alpha = r.real("alpha")?;
    let edges = r.tagged("edges")?;
    let n_edges = match edges.as_slice() {
        [e] => e
            .parse::<usize>()
            .map_err(|_| r.err("invalid edge count"))?,
        _ => return Err(r.err("edges takes exactly one value")),
    };
    let w_edge = r.reals("w_edge")?;
    let w_out = r.reals("w_out")?;
    r.finish()?;
    for (what, v) in [("w_edge", &w_edge), ("w_out", &w_out)] {
        if v.len() != n_edges {
            return Err(NeuralError::CountMismatch {
                what: what.into(),
                expected: n_edges,
                actual: v.len(),
            });
        }
    }
    Ok((NbpWeights { w_edge, w_out }, alpha))
}
