//! Token vocabulary, question/answer rendering and training-sequence assembly.

mod assemble;
mod render;
mod vocab;

use thiserror::Error;

pub use crate::labeler::VqaFormulation;
pub(crate) use assemble::SequenceBuilder;
pub use assemble::{assemble_sequence, PromptLayout, QaPair, SequenceSegments, Spans, DEFAULT_CONTEXT_LEN};
pub use render::{actions_to_tokens, answer_continuations, render_answer, render_question};
pub use vocab::{answer_block_words, Block, Vocabulary, ACTION_PAD, BOS, EOS, MAX_VOCAB, PAD, SEP};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("word {0:?} appears in two vocabulary blocks")]
    DuplicateWord(String),
    #[error("vocabulary has {0} words, limit is 512")]
    VocabularyTooLarge(usize),
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(u32),
    #[error("object {0:?} is not a lexicon phrase")]
    UnknownObject(String),
    #[error("the baseline formulation has no question")]
    NoQuestion,
    #[error("sequence of {len} tokens exceeds context length {context}")]
    ContextOverflow { len: usize, context: usize },
}
