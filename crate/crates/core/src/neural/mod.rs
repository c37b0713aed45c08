//! Minimal numeric kernel: dense tensors, a stacked BiLSTM, ReLU layers, the
//! biaffine scorer, softmax cross-entropy, dropout, Adam and a gradient
//! checker. All arithmetic is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod dropout;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layers::{Biaffine, ReluLayer};
pub use loss::{softmax, softmax_xent};
pub use lstm::{bilstm_backward, bilstm_forward, BiLstm, Dropout, LstmParams};
pub use tensor::{Grads, ParamId, ParamStore, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}
