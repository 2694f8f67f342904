//! Scalar reverse-mode differentiation.
//!
//! Every operation appends a node holding its value, up to two input node
//! ids and the local partial derivative with respect to each input,
//! evaluated at record time. [`Tape::backward`] walks the nodes once in
//! reverse and accumulates adjoints. Inputs always precede the node that
//! uses them, so the tape is topologically ordered by construction.
//!
//! Supported primitives and their partials:
//!
//! | op          | value                  | partials                                  |
//! |-------------|------------------------|-------------------------------------------|
//! | `add`       | `a + b`                | `1, 1`                                    |
//! | `sub`       | `a − b`                | `1, −1`                                   |
//! | `mul`       | `a · b`                | `b, a`                                    |
//! | `div`       | `a / b`                | `1/b, −a/b²`                              |
//! | `tanh`      | `tanh a`               | `1 − tanh² a`                             |
//! | `ln`        | `ln a`                 | `1/a`                                     |
//! | `exp`       | `eᵃ`                   | `eᵃ`                                      |
//! | `abs`       | `|a|`                  | `sign a` (0 at 0)                         |
//! | `clip`      | `f_c(a, α)`            | 1 strictly inside `(α, 2−α)`, else 0      |
//! | `elu`       | `a` or `β(eᵃ − 1)`     | 1 for `a > 0`, else `βeᵃ`                 |
//! | `softplus`  | `ln(1 + eᵃ)`           | `1/(1 + e⁻ᵃ)`                             |
//!
//! Constants and inputs are leaves. An `opaque` leaf records a value that
//! has no derivative rule; reaching it with a nonzero adjoint during the
//! backward pass is an error.

use thiserror::Error;

use crate::msgpass::clip;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("node {0} has no derivative rule")]
    UnsupportedNode(usize),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Input,
    Constant,
    Opaque,
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Ln,
    Exp,
    Abs,
    Clip,
    Elu,
    Softplus,
}

#[derive(Clone, Debug)]
struct Node {
    kind: OpKind,
    inputs: [usize; 2],
    partials: [f64; 2],
    arity: u8,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

/// Adjoints `∂output/∂node` for every node of a tape.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adjoints[v.0]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].kind
    }

    fn push(&mut self, kind: OpKind, value: f64, inputs: &[(Var, f64)]) -> Var {
        let mut node = Node {
            kind,
            inputs: [0; 2],
            partials: [0.0; 2],
            arity: inputs.len() as u8,
        };
        for (slot, &(v, d)) in inputs.iter().enumerate() {
            debug_assert!(v.0 < self.nodes.len());
            node.inputs[slot] = v.0;
            node.partials[slot] = d;
        }
        self.nodes.push(node);
        self.values.push(value);
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf.
    pub fn input(&mut self, value: f64) -> Var {
        self.push(OpKind::Input, value, &[])
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(OpKind::Constant, value, &[])
    }

    /// A leaf without a derivative rule.
    pub fn opaque(&mut self, value: f64) -> Var {
        self.push(OpKind::Opaque, value, &[])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(OpKind::Add, v, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(OpKind::Sub, v, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(OpKind::Mul, x * y, &[(a, y), (b, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(OpKind::Div, x / y, &[(a, 1.0 / y), (b, -x / (y * y))])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.push(OpKind::Tanh, t, &[(a, 1.0 - t * t)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(OpKind::Ln, x.ln(), &[(a, 1.0 / x)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.push(OpKind::Exp, e, &[(a, e)])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.push(OpKind::Abs, x.abs(), &[(a, d)])
    }

    pub fn clip(&mut self, a: Var, alpha: f64) -> Var {
        let x = self.value(a);
        let d = if x > alpha && x < 2.0 - alpha {
            1.0
        } else {
            0.0
        };
        self.push(OpKind::Clip, clip(x, alpha), &[(a, d)])
    }

    pub fn elu(&mut self, a: Var, beta: f64) -> Var {
        let x = self.value(a);
        let (v, d) = if x > 0.0 {
            (x, 1.0)
        } else {
            (beta * (x.exp() - 1.0), beta * x.exp())
        };
        self.push(OpKind::Elu, v, &[(a, d)])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(OpKind::Softplus, softplus(x), &[(a, sigmoid(x))])
    }

    /// Left-to-right sum; `0` for an empty slice.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        match terms.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    /// Reverse accumulation from `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients, TapeError> {
        if output.0 >= self.nodes.len() {
            return Err(TapeError::UnknownNode(output.0));
        }
        let mut adj = vec![0.0; output.0 + 1];
        adj[output.0] = 1.0;
        for id in (0..=output.0).rev() {
            let g = adj[id];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[id];
            if node.kind == OpKind::Opaque {
                return Err(TapeError::UnsupportedNode(id));
            }
            for slot in 0..node.arity as usize {
                adj[node.inputs[slot]] += g * node.partials[slot];
            }
        }
        adj.resize(self.nodes.len(), 0.0);
        Ok(Gradients { adjoints: adj })
    }
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
