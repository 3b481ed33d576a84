//! Attentional encoder-decoder translation models: a bidirectional LSTM
//! with additive attention and a Transformer, trained with a small
//! reverse-mode autodiff tape.

pub mod beam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod rnn;
pub mod tensor;
pub mod train;
pub mod transformer;
pub mod unk;

pub use beam::{beam_search, greedy, Hypothesis, StepModel};
pub use model::{Architecture, EmbeddingInit, Model, ModelConfig};
pub use train::{train, TrainConfig, TrainLog};
pub use unk::{unk_replace, UnkMode};

#[derive(Debug, thiserror::Error)]
pub enum NmtError {
    #[error("config: {0}")]
    Config(String),
    #[error(
        "non-finite loss at epoch {epoch}, step {step} (lr {lr}, loss {loss}, grad norm {grad_norm}, batch {batch:?})"
    )]
    NonFinite { epoch: usize, step: usize, lr: f64, loss: f64, grad_norm: f64, batch: Vec<usize> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("gradient check: {0}")]
    GradCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
