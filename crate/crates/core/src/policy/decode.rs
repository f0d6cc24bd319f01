use crate::labeler::VqaFormulation;
use crate::prompting::{answer_continuations, PromptLayout, SequenceBuilder, SequenceSegments, Vocabulary};

use super::forward::{forward, AttentionRecord};
use super::weights::TransformerWeights;
use super::PolicyError;

/// Longest answer the grammar can produce is a bracketed triple of signed digits.
const MAX_ANSWER_TOKENS: usize = 16;

/// Context given to the decoder: observation, one question per queried
/// object, and the instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodePrompt {
    pub obs: Vec<u32>,
    pub questions: Vec<Vec<u32>>,
    pub instruction: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Decoded {
    /// One decoded answer per question.
    pub answers: Vec<Vec<u32>>,
    /// Exactly `h` tokens from the action block, possibly including pads.
    pub actions: Vec<u32>,
    /// Full decoded sequence without EOS; answer and action tokens are marked.
    pub sequence: SequenceSegments,
    /// Attention of the final forward pass, whose query rows cover every
    /// position that emitted an action token.
    pub attention: AttentionRecord,
}

/// Greedy pick over `allowed`, ties going to the lowest id.
fn argmax_among(row: &[f32], allowed: &[u32]) -> u32 {
    let mut best = allowed[0];
    for &id in &allowed[1..] {
        if row[id as usize] > row[best as usize] {
            best = id;
        }
    }
    best
}

fn next_logits(w: &TransformerWeights, tokens: &[u32]) -> Result<(Vec<f32>, AttentionRecord), PolicyError> {
    let (logits, record) = forward(w, tokens)?;
    Ok((logits.row(logits.rows() - 1).to_vec(), record))
}

/// Two-step greedy decode: each answer slot is filled under the answer
/// grammar, then `h` action tokens are decoded conditioned on those answers.
/// One continuous autoregressive pass; no sampling.
pub fn decode_two_step(
    w: &TransformerWeights,
    vocab: &Vocabulary,
    prompt: &DecodePrompt,
    formulation: VqaFormulation,
    layout: PromptLayout,
    h: usize,
) -> Result<Decoded, PolicyError> {
    if h == 0 {
        return Err(PolicyError::InvalidConfig("action chunk must be at least 1".into()));
    }
    decode(w, vocab, prompt, formulation, layout, h)
}

/// Step one only: the constrained answers, without decoding actions.
pub fn decode_answers(
    w: &TransformerWeights,
    vocab: &Vocabulary,
    prompt: &DecodePrompt,
    formulation: VqaFormulation,
    layout: PromptLayout,
) -> Result<Vec<Vec<u32>>, PolicyError> {
    Ok(decode(w, vocab, prompt, formulation, layout, 0)?.answers)
}

fn decode(
    w: &TransformerWeights,
    vocab: &Vocabulary,
    prompt: &DecodePrompt,
    formulation: VqaFormulation,
    layout: PromptLayout,
    h: usize,
) -> Result<Decoded, PolicyError> {
    if !formulation.is_none() && prompt.questions.is_empty() {
        return Err(PolicyError::MissingQuestions);
    }
    let questions: &[Vec<u32>] = if formulation.is_none() { &[] } else { &prompt.questions };
    let mut b = SequenceBuilder::default();
    b.push(&[vocab.bos()], false);
    b.spans.obs = b.push(&prompt.obs, false);
    if layout == PromptLayout::InstructFirst || formulation.is_none() {
        b.spans.instruction = b.push(&prompt.instruction, false);
    }
    let mut answers = Vec::with_capacity(questions.len());
    for q in questions {
        let qs = b.push(q, false);
        b.spans.questions.push(qs);
        let start = b.tokens.len();
        let mut words: Vec<&str> = Vec::new();
        while let Some(options) = answer_continuations(formulation, &words) {
            if words.len() >= MAX_ANSWER_TOKENS {
                break;
            }
            let mut allowed: Vec<u32> = options
                .iter()
                .map(|o| vocab.id(o).expect("answer grammar words are in the vocabulary"))
                .collect();
            allowed.sort_unstable();
            let (row, _) = next_logits(w, &b.tokens)?;
            let id = argmax_among(&row, &allowed);
            b.push(&[id], true);
            words.push(vocab.word(id).expect("allowed id"));
        }
        b.spans.answers.push(start..b.tokens.len());
        answers.push(b.tokens[start..].to_vec());
    }
    if h == 0 {
        return Ok(Decoded {
            answers,
            actions: Vec::new(),
            sequence: SequenceSegments { tokens: b.tokens, loss_mask: b.mask, spans: b.spans },
            attention: AttentionRecord::default(),
        });
    }
    if layout == PromptLayout::VqaFirst && !formulation.is_none() {
        b.spans.instruction = b.push(&prompt.instruction, false);
    }
    let action_ids = vocab.action_ids();
    let start = b.tokens.len();
    let mut attention = AttentionRecord::default();
    for _ in 0..h {
        let (row, record) = next_logits(w, &b.tokens)?;
        attention = record;
        let id = argmax_among(&row, &action_ids);
        b.push(&[id], true);
    }
    b.spans.actions = start..b.tokens.len();
    let actions = b.tokens[start..].to_vec();
    Ok(Decoded {
        answers,
        actions,
        sequence: SequenceSegments { tokens: b.tokens, loss_mask: b.mask, spans: b.spans },
        attention,
    })
}

/// Probability mass a constrained step assigns to each id: softmax over
/// `allowed` only, exactly zero elsewhere.
pub fn constrained_distribution(row: &[f32], allowed: &[u32]) -> Vec<f32> {
    let max = allowed.iter().map(|&i| row[i as usize]).fold(f32::NEG_INFINITY, f32::max);
    let mut out = vec![0.0f32; row.len()];
    let mut z = 0.0f32;
    for &i in allowed {
        let e = (row[i as usize] - max).exp();
        out[i as usize] = e;
        z += e;
    }
    for &i in allowed {
        out[i as usize] /= z;
    }
    out
}
