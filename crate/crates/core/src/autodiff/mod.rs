//! Dense 2-D tensors with tape-based reverse-mode differentiation,
//! optimizers, finite-difference checking and binary checkpoints.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradReport, GroupReport, REL_ERR_FLOOR};
pub use params::{
    adam_step, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, sgd_step, Adam, Gradients,
    Param, ParamStore,
};
pub use tape::{Tape, Var, VarGrads, COSINE_EPS};
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op} produced a non-finite value")]
    NonFiniteValue { op: &'static str },
    #[error("backward needs a 1x1 root, got {shape:?}")]
    NonScalarRoot { shape: (usize, usize) },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}
