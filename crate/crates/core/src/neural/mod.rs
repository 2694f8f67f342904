//! Reverse-mode differentiation, the edge-weight network, Adam and the
//! model file format.

mod adam;
mod fnn;
mod model_io;
mod tape;

pub use adam::AdamState;
pub use fnn::{elu, FnnKernel, FnnModel, FnnTrace, CANONICAL_DIMS, CANONICAL_PARAMS};
pub use model_io::{model_load, model_save, nbp_load, nbp_save, MODEL_HEADER, NBP_HEADER};
pub use tape::{sigmoid, softplus, Gradients, OpKind, Tape, TapeError, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("network input is not finite")]
    NonFiniteInput,
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("model file line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("unrecognised model header {0:?}")]
    VersionMismatch(String),
    #[error("{what}: expected {expected} values, found {actual}")]
    CountMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
}
