//! Dense rank-2 tensors, a reverse-mode tape, named parameter storage and a
//! finite-difference gradient checker.

mod gradcheck;
mod store;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{finite_difference_check, GradCheckReport, TensorCheck};
pub use store::{AdapterSpec, DType, Entry, Gradients, ParameterStore};
pub use tape::{Tape, Var};
pub use tensor::{sigmoid, silu, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("loss must be 1x1, got {}x{}", shape.0, shape.1)]
    NonScalarLoss { shape: (usize, usize) },
    #[error("computation graph contains a cycle")]
    GraphCycle,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` already exists")]
    DuplicateParameter(String),
}
