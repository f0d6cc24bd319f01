use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::labeler::VqaFormulation;

use super::vocab::Vocabulary;
use super::PromptError;

pub const DEFAULT_CONTEXT_LEN: usize = 160;

/// Where the question/answer segment sits relative to the instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLayout {
    /// BOS, obs, QA, instruction, actions, EOS.
    #[default]
    VqaFirst,
    /// BOS, obs, instruction, QA, actions, EOS.
    InstructFirst,
}

impl PromptLayout {
    pub const ALL: [PromptLayout; 2] = [PromptLayout::VqaFirst, PromptLayout::InstructFirst];

    pub fn name(self) -> &'static str {
        match self {
            PromptLayout::VqaFirst => "vqa_first",
            PromptLayout::InstructFirst => "instruct_first",
        }
    }
}

impl std::str::FromStr for PromptLayout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown layout {s:?}"))
    }
}

/// One question with its answer, as token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub object: String,
    pub question: Vec<u32>,
    pub answer: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Spans {
    pub obs: Range<usize>,
    pub questions: Vec<Range<usize>>,
    pub answers: Vec<Range<usize>>,
    pub instruction: Range<usize>,
    pub actions: Range<usize>,
}

/// An assembled sequence: tokens, per-position loss mask and named spans.
///
/// `loss_mask[i] == 1` marks token `i` as a prediction target, scored from
/// the logits at position `i - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSegments {
    pub tokens: Vec<u32>,
    pub loss_mask: Vec<u8>,
    pub spans: Spans,
}

impl SequenceSegments {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn slice(&self, r: &Range<usize>) -> &[u32] {
        &self.tokens[r.clone()]
    }

    /// Masked target tokens in sequence order.
    pub fn targets(&self) -> Vec<u32> {
        self.tokens.iter().zip(&self.loss_mask).filter(|(_, &m)| m == 1).map(|(&t, _)| t).collect()
    }
}

/// Incrementally appends segments while tracking spans.
#[derive(Debug, Default)]
pub(crate) struct SequenceBuilder {
    pub tokens: Vec<u32>,
    pub mask: Vec<u8>,
    pub spans: Spans,
}

impl SequenceBuilder {
    pub fn push(&mut self, ids: &[u32], target: bool) -> Range<usize> {
        let start = self.tokens.len();
        self.tokens.extend_from_slice(ids);
        self.mask.extend(std::iter::repeat_n(u8::from(target), ids.len()));
        start..self.tokens.len()
    }

    pub fn push_qa(&mut self, qa: &[QaPair]) {
        for pair in qa {
            let q = self.push(&pair.question, false);
            let a = self.push(&pair.answer, true);
            self.spans.questions.push(q);
            self.spans.answers.push(a);
        }
    }
}

/// Assembles `BOS, obs, [QA | instruction in layout order], actions, EOS`.
///
/// Only answer and action tokens are loss targets. The QA segment is omitted
/// for the baseline formulation.
pub fn assemble_sequence(
    vocab: &Vocabulary,
    obs: &[u32],
    qa: &[QaPair],
    instruction: &[u32],
    actions: &[u32],
    layout: PromptLayout,
    formulation: VqaFormulation,
    context_len: usize,
) -> Result<SequenceSegments, PromptError> {
    let qa: &[QaPair] = if formulation.is_none() { &[] } else { qa };
    let mut b = SequenceBuilder::default();
    b.push(&[vocab.bos()], false);
    b.spans.obs = b.push(obs, false);
    match layout {
        PromptLayout::VqaFirst => {
            b.push_qa(qa);
            b.spans.instruction = b.push(instruction, false);
        }
        PromptLayout::InstructFirst => {
            b.spans.instruction = b.push(instruction, false);
            b.push_qa(qa);
        }
    }
    b.spans.actions = b.push(actions, true);
    b.push(&[vocab.eos()], false);
    if b.tokens.len() > context_len {
        return Err(PromptError::ContextOverflow { len: b.tokens.len(), context: context_len });
    }
    if let Some(&bad) = b.tokens.iter().find(|&&t| t as usize >= vocab.len()) {
        return Err(PromptError::UnknownId(bad));
    }
    Ok(SequenceSegments { tokens: b.tokens, loss_mask: b.mask, spans: b.spans })
}
