use std::ops::Range;

use crate::autodiff::{NodeId, Tape, Tensor};

use super::weights::TransformerWeights;
use super::PolicyError;

/// Attention probabilities of one forward pass: `layers[l][h]` is `[T, T]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionRecord {
    pub layers: Vec<Vec<Tensor>>,
}

impl AttentionRecord {
    pub fn seq_len(&self) -> usize {
        self.layers.first().and_then(|l| l.first()).map_or(0, Tensor::rows)
    }
}

/// Nodes produced by [`forward_on_tape`].
pub struct ForwardNodes {
    pub logits: NodeId,
    pub attention: Vec<Vec<NodeId>>,
}

/// Builds the causal decoder graph for `tokens` on `tape`.
pub fn forward_on_tape(tape: &mut Tape, w: &TransformerWeights, tokens: &[u32]) -> Result<ForwardNodes, PolicyError> {
    let c = &w.config;
    let t = tokens.len();
    if t == 0 {
        return Err(PolicyError::EmptySequence);
    }
    if t > c.context_len {
        return Err(PolicyError::ContextOverflow { len: t, context: c.context_len });
    }
    if let Some(&bad) = tokens.iter().find(|&&id| id as usize >= c.vocab_size) {
        return Err(PolicyError::TokenOutOfRange { id: bad, vocab: c.vocab_size });
    }
    let (d, dh) = (c.d_model, c.head_dim());
    let positions: Vec<u32> = (0..t as u32).collect();
    let tok_table = tape.param(w.tok_emb);
    let pos_table = tape.param(w.pos_emb);
    let tok = tape.embedding(tok_table, tokens)?;
    let pos = tape.embedding(pos_table, &positions)?;
    let mut x = tape.add(tok, pos)?;
    let scale = 1.0 / (dh as f32).sqrt();
    let mut attention = Vec::with_capacity(c.layers);
    for lp in &w.layers {
        let (g1, b1) = (tape.param(lp.ln1_gain), tape.param(lp.ln1_bias));
        let h = tape.layer_norm(x, g1, b1)?;
        let (wqkv, bqkv) = (tape.param(lp.w_qkv), tape.param(lp.b_qkv));
        let qkv = tape.matmul(h, wqkv)?;
        let qkv = tape.add_row(qkv, bqkv)?;
        let mut heads = Vec::with_capacity(c.heads);
        let mut probs = Vec::with_capacity(c.heads);
        for head in 0..c.heads {
            let q = tape.slice(qkv, head * dh, dh)?;
            let k = tape.slice(qkv, d + head * dh, dh)?;
            let v = tape.slice(qkv, 2 * d + head * dh, dh)?;
            let scores = tape.matmul_nt(q, k)?;
            let scores = tape.scale(scores, scale)?;
            let scores = tape.causal_mask(scores)?;
            let p = tape.softmax(scores)?;
            probs.push(p);
            heads.push(tape.matmul(p, v)?);
        }
        attention.push(probs);
        let cat = tape.concat(&heads)?;
        let (wo, bo) = (tape.param(lp.w_o), tape.param(lp.b_o));
        let o = tape.matmul(cat, wo)?;
        let o = tape.add_row(o, bo)?;
        x = tape.add(x, o)?;
        let (g2, b2) = (tape.param(lp.ln2_gain), tape.param(lp.ln2_bias));
        let h = tape.layer_norm(x, g2, b2)?;
        let (wi, bi) = (tape.param(lp.w_in), tape.param(lp.b_in));
        let m = tape.matmul(h, wi)?;
        let m = tape.add_row(m, bi)?;
        let m = tape.relu(m)?;
        let (wout, bout) = (tape.param(lp.w_out), tape.param(lp.b_out));
        let m = tape.matmul(m, wout)?;
        let m = tape.add_row(m, bout)?;
        x = tape.add(x, m)?;
    }
    let (gf, bf) = (tape.param(w.ln_f_gain), tape.param(w.ln_f_bias));
    let x = tape.layer_norm(x, gf, bf)?;
    let (head, hb) = (tape.param(w.head), tape.param(w.head_bias));
    let logits = tape.matmul(x, head)?;
    let logits = tape.add_row(logits, hb)?;
    Ok(ForwardNodes { logits, attention })
}

/// Logits `[T, V]` and the attention record for `tokens`.
pub fn forward(w: &TransformerWeights, tokens: &[u32]) -> Result<(Tensor, AttentionRecord), PolicyError> {
    let mut tape = Tape::new(&w.store);
    let nodes = forward_on_tape(&mut tape, w, tokens)?;
    let record = AttentionRecord {
        layers: nodes
            .attention
            .iter()
            .map(|heads| heads.iter().map(|&n| tape.value(n).clone()).collect())
            .collect(),
    };
    Ok((tape.value(nodes.logits).clone(), record))
}

/// Final-layer attention weight from `queries` onto `keys`, summed over the
/// key span, averaged over heads and then over query positions.
pub fn attention_mass_on_span(
    record: &AttentionRecord,
    queries: Range<usize>,
    keys: Range<usize>,
) -> Result<f64, PolicyError> {
    let t = record.seq_len();
    if queries.is_empty() || keys.is_empty() {
        return Err(PolicyError::EmptySpan);
    }
    if queries.end > t || keys.end > t {
        return Err(PolicyError::SpanOutOfRange { end: queries.end.max(keys.end), len: t });
    }
    let last = record.layers.last().ok_or(PolicyError::EmptySpan)?;
    let mut total = 0.0f64;
    for q in queries.clone() {
        let per_head: f64 = last
            .iter()
            .map(|a| a.row(q)[keys.clone()].iter().map(|&p| f64::from(p)).sum::<f64>())
            .sum::<f64>();
        total += per_head / last.len() as f64;
    }
    Ok((total / queries.len() as f64).clamp(0.0, 1.0))
}
