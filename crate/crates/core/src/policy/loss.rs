use crate::autodiff::{Gradients, NodeId, Tape};

use super::forward::forward_on_tape;
use super::weights::TransformerWeights;
use super::PolicyError;

/// Builds the masked next-token loss for one sequence: the model reads
/// `tokens[..T-1]` and the logits at `i` score `tokens[i + 1]` where
/// `loss_mask[i + 1] == 1`. Returns the loss node and the logits node.
pub fn sequence_loss_on_tape(
    tape: &mut Tape,
    w: &TransformerWeights,
    tokens: &[u32],
    loss_mask: &[u8],
) -> Result<(NodeId, NodeId), PolicyError> {
    if tokens.len() < 2 || loss_mask.len() != tokens.len() {
        return Err(PolicyError::EmptySequence);
    }
    let nodes = forward_on_tape(tape, w, &tokens[..tokens.len() - 1])?;
    let loss = tape.masked_cross_entropy(nodes.logits, &tokens[1..], &loss_mask[1..])?;
    Ok((loss, nodes.logits))
}

/// Statistics from [`accumulate_sequence_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceStats {
    pub loss: f32,
    pub targets: usize,
    pub correct: usize,
}

/// Adds `scale * d(loss)/d(params)` for one sequence into `grads` and reports
/// the loss and greedy next-token accuracy over the masked targets.
pub fn accumulate_sequence_gradients(
    w: &TransformerWeights,
    tokens: &[u32],
    loss_mask: &[u8],
    scale: f32,
    grads: &mut Gradients,
) -> Result<SequenceStats, PolicyError> {
    let mut tape = Tape::new(&w.store);
    let (loss, logits) = sequence_loss_on_tape(&mut tape, w, tokens, loss_mask)?;
    tape.backward_scaled(loss, scale, grads)?;
    let (targets, correct) = masked_accuracy(tape.value(logits), tokens, loss_mask);
    Ok(SequenceStats { loss: tape.value(loss).item(), targets, correct })
}

/// Loss and accuracy without gradients.
pub fn evaluate_sequence(w: &TransformerWeights, tokens: &[u32], loss_mask: &[u8]) -> Result<SequenceStats, PolicyError> {
    let mut tape = Tape::new(&w.store);
    let (loss, logits) = sequence_loss_on_tape(&mut tape, w, tokens, loss_mask)?;
    let (targets, correct) = masked_accuracy(tape.value(logits), tokens, loss_mask);
    Ok(SequenceStats { loss: tape.value(loss).item(), targets, correct })
}

/// Unconstrained argmax over the full vocabulary at each masked position.
fn masked_accuracy(logits: &crate::autodiff::Tensor, tokens: &[u32], mask: &[u8]) -> (usize, usize) {
    let mut targets = 0;
    let mut correct = 0;
    for i in 0..logits.rows() {
        if mask[i + 1] == 0 {
            continue;
        }
        targets += 1;
        let row = logits.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best as u32 == tokens[i + 1] {
            correct += 1;
        }
    }
    (targets, correct)
}
