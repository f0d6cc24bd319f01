//! Causal transformer policy: answers and actions from one set of weights.

mod config;
mod decode;
mod forward;
mod gradcheck;
mod loss;
mod reference;
mod weights;

pub use config::ModelConfig;
pub use decode::{constrained_distribution, decode_answers, decode_two_step, DecodePrompt, Decoded};
pub use forward::{attention_mass_on_span, forward, forward_on_tape, AttentionRecord, ForwardNodes};
pub use gradcheck::{gradcheck, GradcheckConfig, GradcheckReport, TensorCheck};
pub use loss::{accumulate_sequence_gradients, evaluate_sequence, sequence_loss_on_tape, SequenceStats};
pub use reference::{reference_eval, reference_loss, ReferenceEval, ReferenceParams};
pub use weights::{LayerParams, TransformerWeights, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("sequence of {len} tokens exceeds context {context}")]
    ContextOverflow { len: usize, context: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("empty span")]
    EmptySpan,
    #[error("span ends at {end} but sequence has {len} positions")]
    SpanOutOfRange { end: usize, len: usize },
    #[error("formulation needs at least one question")]
    MissingQuestions,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
