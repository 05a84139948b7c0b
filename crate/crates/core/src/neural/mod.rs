//! Minimal neural engine: the LSTM cell with exact BPTT, a dense baseline,
//! the Adam optimizer, and flat-binary checkpoints. No external ML
//! framework; gradients are validated against central finite differences.

mod adam;
mod checkpoint;
mod lstm;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, ModelParams, CHECKPOINT_MAGIC};
pub use lstm::{
    backward_sequence, forward_multi, forward_sequence, lstm_step, ForwardTape, GateCache,
    LstmParams, LstmState,
};
pub use mlp::{mlp_backward, mlp_forward, DenseLayer, MlpParams, MlpTape};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation at step {step}")]
    NonFiniteActivation { step: usize },
    #[error("tape does not match the parameters it is replayed against")]
    TapeMismatch,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
