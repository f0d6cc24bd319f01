use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::loss::sequence_loss_on_tape;
use super::reference::{reference_eval, ReferenceParams};
use super::weights::TransformerWeights;
use super::PolicyError;
use crate::autodiff::Tape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seq_len: usize,
    /// Coordinates checked per tensor; the largest-gradient entry is always included.
    pub samples_per_tensor: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Replacement draws allowed per tensor for coordinates whose difference
    /// interval crosses a ReLU kink.
    pub max_resamples: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { seq_len: 12, samples_per_tensor: 24, step: 1e-3, tolerance: 1e-4, seed: 0, max_resamples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub coords: usize,
    pub max_abs_grad: f64,
    pub rel_err: f64,
    /// Coordinates discarded because `x - h` and `x + h` saw different ReLU patterns.
    pub kinked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub model: ModelConfig,
    pub config: GradcheckConfig,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Compares tape gradients of the masked sequence loss against central
/// differences of the independent f64 reference, per parameter tensor.
///
/// The error of a tensor is `max |ad - fd| / max |fd|` over its checked
/// coordinates, which stays meaningful when individual entries are near zero.
/// A central difference across a ReLU kink measures a chord rather than the
/// derivative, so such coordinates are replaced by fresh draws and counted.
pub fn gradcheck(model: ModelConfig, config: GradcheckConfig) -> Result<GradcheckReport, PolicyError> {
    let w = TransformerWeights::init(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.seq_len.clamp(2, model.context_len + 1);
    let tokens: Vec<u32> = (0..n).map(|_| rng.random_range(0..model.vocab_size as u32)).collect();
    let mut mask: Vec<u8> = (0..n).map(|i| u8::from(i > 0 && rng.random_bool(0.6))).collect();
    mask[n - 1] = 1;

    let mut grads = w.store.zero_grads();
    {
        let mut tape = Tape::new(&w.store);
        let (loss, _) = sequence_loss_on_tape(&mut tape, &w, &tokens, &mask)?;
        tape.backward(loss, &mut grads)?;
    }
    let mut params = ReferenceParams::from_weights(&w);
    let mut tensors = Vec::new();
    for id in w.store.ids() {
        let ad = grads.get(id).data();
        let largest = (0..ad.len()).max_by(|&a, &b| ad[a].abs().total_cmp(&ad[b].abs())).unwrap_or(0);
        let mut queue: Vec<usize> = vec![largest];
        let (mut max_diff, mut max_fd) = (0.0f64, 0.0f64);
        let (mut checked, mut kinked) = (std::collections::BTreeSet::new(), 0usize);
        let target = config.samples_per_tensor.min(ad.len());
        while checked.len() < target && kinked <= config.max_resamples {
            let j = queue.pop().unwrap_or_else(|| rng.random_range(0..ad.len()));
            if checked.contains(&j) {
                continue;
            }
            let orig = params.tensors[id.0][j];
            params.tensors[id.0][j] = orig + config.step;
            let up = reference_eval(&w, &params, &tokens, &mask);
            params.tensors[id.0][j] = orig - config.step;
            let down = reference_eval(&w, &params, &tokens, &mask);
            params.tensors[id.0][j] = orig;
            if up.relu_pattern != down.relu_pattern {
                kinked += 1;
                continue;
            }
            checked.insert(j);
            let fd = (up.loss - down.loss) / (2.0 * config.step);
            max_diff = max_diff.max((fd - f64::from(ad[j])).abs());
            max_fd = max_fd.max(fd.abs());
        }
        let rel_err = if max_fd == 0.0 { max_diff } else { max_diff / max_fd };
        tensors.push(TensorCheck { name: w.store.name(id).to_string(), coords: checked.len(), max_abs_grad: max_fd, rel_err, kinked });
    }
    let max_rel_err = tensors.iter().map(|t| t.rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport { model, config, tensors, passed: max_rel_err < config.tolerance, max_rel_err })
}
