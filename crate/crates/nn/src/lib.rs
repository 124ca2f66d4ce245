//! Small dense numerical kernel: row-major `f64` matrices, a define-by-run
//! reverse-mode tape with the ops a heterogeneous graph attention network
//! needs, Adam, finite-difference gradient checks and JSON checkpoints.

mod adam;
mod checkpoint;
mod gradcheck;
mod matrix;
mod param;
mod tape;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, StoredTensor, CHECKPOINT_VERSION};
pub use gradcheck::grad_check;
pub use matrix::Matrix;
pub use param::{Gradients, ParamId, ParamSet, Parameter};
pub use tape::{leaky, softmax_rows, Tape, Var};

/// Negative slope used by every leaky-ReLU in the policy networks.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("expected {expected} values, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("softmax over a row where every logit is -inf")]
    AllMasked,
    #[error("expected a scalar output, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("duplicate parameter name {0}")]
    DuplicateParameter(String),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Self {
        Self::ShapeMismatch { op, lhs, rhs }
    }
}
