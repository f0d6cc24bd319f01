//! Minimal reverse-mode automatic differentiation over dense f32 tensors.

mod kernels;
mod optim;
mod params;
mod tape;
mod tensor;

pub use kernels::{dot, matmul_acc, matmul_nt_acc, matmul_tn_acc};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{softmax_in_place, NodeGrads, NodeId, Tape, LAYER_NORM_EPS, MASKED_SCORE};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("loss mask selects no positions")]
    EmptyMask,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
}
