//! Straightforward f64 re-implementation of the decoder and its loss, used
//! as an independent oracle for gradient checking. Shares no code with the
//! tape.

use crate::autodiff::LAYER_NORM_EPS;

use super::weights::TransformerWeights;

/// Every parameter tensor widened to f64, in storage order.
#[derive(Debug, Clone)]
pub struct ReferenceParams {
    pub tensors: Vec<Vec<f64>>,
}

impl ReferenceParams {
    pub fn from_weights(w: &TransformerWeights) -> Self {
        Self { tensors: w.store.values().iter().map(|t| t.data().iter().map(|&v| f64::from(v)).collect()).collect() }
    }
}

fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

fn add_bias(x: &mut [f64], b: &[f64]) {
    let n = b.len();
    for (i, v) in x.iter_mut().enumerate() {
        *v += b[i % n];
    }
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; x.len()];
    for (r, row) in x.chunks(n).enumerate() {
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let rstd = 1.0 / (var + f64::from(LAYER_NORM_EPS)).sqrt();
        for j in 0..n {
            out[r * n + j] = (row[j] - mean) * rstd * g[j] + b[j];
        }
    }
    out
}

/// Masked mean next-token negative log-likelihood: the logits at position
/// `i` score `tokens[i + 1]` where `loss_mask[i + 1] == 1`.
pub fn reference_loss(w: &TransformerWeights, p: &ReferenceParams, tokens: &[u32], loss_mask: &[u8]) -> f64 {
    reference_eval(w, p, tokens, loss_mask).loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEval {
    pub loss: f64,
    /// Which MLP units were active, over all layers and positions. The loss is
    /// smooth only while this pattern stays fixed.
    pub relu_pattern: Vec<bool>,
}

pub fn reference_eval(w: &TransformerWeights, p: &ReferenceParams, tokens: &[u32], loss_mask: &[u8]) -> ReferenceEval {
    let c = &w.config;
    let (d, nh, dh, v) = (c.d_model, c.heads, c.head_dim(), c.vocab_size);
    let input = &tokens[..tokens.len() - 1];
    let t = input.len();
    let get = |id: crate::autodiff::ParamId| p.tensors[id.0].as_slice();
    let (tok, pos) = (get(w.tok_emb), get(w.pos_emb));
    let mut x = vec![0.0; t * d];
    let mut relu_pattern = Vec::with_capacity(c.layers * t * 4 * d);
    for (i, &id) in input.iter().enumerate() {
        for j in 0..d {
            x[i * d + j] = tok[id as usize * d + j] + pos[i * d + j];
        }
    }
    for lp in &w.layers {
        let h = layer_norm(&x, get(lp.ln1_gain), get(lp.ln1_bias));
        let mut qkv = matmul(&h, get(lp.w_qkv), t, d, 3 * d);
        add_bias(&mut qkv, get(lp.b_qkv));
        let mut cat = vec![0.0; t * d];
        for head in 0..nh {
            let at = |i: usize, part: usize, j: usize| qkv[i * 3 * d + part * d + head * dh + j];
            for i in 0..t {
                let mut scores: Vec<f64> = (0..=i)
                    .map(|k| (0..dh).map(|j| at(i, 0, j) * at(k, 1, j)).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter_mut().map(|s| {
                    *s = (*s - max).exp();
                    *s
                }).sum();
                for j in 0..dh {
                    cat[i * d + head * dh + j] = (0..=i).map(|k| scores[k] / z * at(k, 2, j)).sum();
                }
            }
        }
        let mut o = matmul(&cat, get(lp.w_o), t, d, d);
        add_bias(&mut o, get(lp.b_o));
        for (a, b) in x.iter_mut().zip(&o) {
            *a += b;
        }
        let h = layer_norm(&x, get(lp.ln2_gain), get(lp.ln2_bias));
        let mut m = matmul(&h, get(lp.w_in), t, d, 4 * d);
        add_bias(&mut m, get(lp.b_in));
        relu_pattern.extend(m.iter().map(|&v| v > 0.0));
        m.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut m = matmul(&m, get(lp.w_out), t, 4 * d, d);
        add_bias(&mut m, get(lp.b_out));
        for (a, b) in x.iter_mut().zip(&m) {
            *a += b;
        }
    }
    let h = layer_norm(&x, get(w.ln_f_gain), get(w.ln_f_bias));
    let mut logits = matmul(&h, get(w.head), t, d, v);
    add_bias(&mut logits, get(w.head_bias));
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..t {
        if loss_mask[i + 1] == 0 {
            continue;
        }
        let row = &logits[i * v..(i + 1) * v];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|r| (r - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[tokens[i + 1] as usize];
        count += 1;
    }
    ReferenceEval { loss: total / count as f64, relu_pattern }
}
