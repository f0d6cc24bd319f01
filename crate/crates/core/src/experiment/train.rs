use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamW, AdamWConfig};
use crate::labeler::VqaFormulation;
use crate::policy::{accumulate_sequence_gradients, ModelConfig, TransformerWeights};
use crate::prompting::{PromptLayout, SequenceSegments};
use crate::sim::{stream_seed, SceneGenConfig};

use super::data::EpochSampler;
use super::ExperimentError;

const MODEL_SEED_STREAM: u64 = 0x4D4F_4445_4C;
const SHUFFLE_SEED_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Training scenes; the scene seed is replaced by `seed`.
    pub scene: SceneGenConfig,
    pub num_trajectories: usize,
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    /// Actions predicted per decode.
    pub chunk: usize,
    /// `vocab_size` and `seed` are filled in from the vocabulary and `seed`.
    pub model: ModelConfig,
    pub batch_size: usize,
    pub steps: usize,
    pub optimizer: AdamWConfig,
    /// Linear warm-up length; the rate then follows a cosine down to `min_lr_ratio`.
    pub warmup_steps: usize,
    pub min_lr_ratio: f32,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f32,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scene: SceneGenConfig::default(),
            num_trajectories: 200,
            formulation: VqaFormulation::None,
            layout: PromptLayout::VqaFirst,
            chunk: 5,
            model: ModelConfig::default(),
            batch_size: 16,
            steps: 3000,
            optimizer: AdamWConfig::default(),
            warmup_steps: 100,
            min_lr_ratio: 0.1,
            grad_clip: 1.0,
            log_every: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Scene config actually used for training data.
    pub fn effective_scene(&self) -> SceneGenConfig {
        SceneGenConfig { seed: self.seed, ..self.scene.clone() }
    }

    /// Model config actually used: vocabulary size filled, seed derived from `seed`.
    pub fn effective_model(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig { vocab_size, seed: stream_seed(self.seed, MODEL_SEED_STREAM), ..self.model }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.chunk == 0 {
            return bad("chunk must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.num_trajectories == 0 {
            return bad("num_trajectories must be at least 1");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_lr_ratio) || self.grad_clip < 0.0 {
            return bad("min_lr_ratio must lie in [0,1] and grad_clip must be non-negative");
        }
        self.scene.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }

    pub fn learning_rate(&self, step: usize) -> f32 {
        let base = self.optimizer.lr;
        if step < self.warmup_steps {
            return base * (step + 1) as f32 / self.warmup_steps as f32;
        }
        let span = self.steps.saturating_sub(self.warmup_steps).max(1);
        let t = ((step - self.warmup_steps) as f32 / span as f32).min(1.0);
        let cos = 0.5 * (1.0 + (std::f32::consts::PI * t).cos());
        base * (self.min_lr_ratio + (1.0 - self.min_lr_ratio) * cos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    /// Mean batch loss over the steps since the previous point.
    pub loss: f32,
    /// Masked next-token accuracy over the same steps.
    pub accuracy: f32,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: TransformerWeights,
    pub loss_curve: Vec<LossPoint>,
    pub steps_run: usize,
    pub examples: usize,
}

impl TrainOutcome {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("step,loss,accuracy\n");
        for p in &self.loss_curve {
            s.push_str(&format!("{},{},{}\n", p.step, p.loss, p.accuracy));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorDecision {
    Continue,
    Stop,
}

pub fn train(
    config: &TrainConfig,
    examples: &[SequenceSegments],
    vocab_size: usize,
) -> Result<TrainOutcome, ExperimentError> {
    train_with_monitor(config, examples, vocab_size, |_, _| MonitorDecision::Continue)
}

/// Trains for `config.steps` steps. `monitor` runs after every logged step
/// and may end training early.
pub fn train_with_monitor(
    config: &TrainConfig,
    examples: &[SequenceSegments],
    vocab_size: usize,
    mut monitor: impl FnMut(usize, &TransformerWeights) -> MonitorDecision,
) -> Result<TrainOutcome, ExperimentError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let mut weights = TransformerWeights::init(config.effective_model(vocab_size))?;
    let mut opt = AdamW::new(config.optimizer, &weights.store)?;
    let mut sampler = EpochSampler::new(examples.len(), stream_seed(config.seed, SHUFFLE_SEED_STREAM));
    let mut grads = weights.store.zero_grads();
    let mut curve = Vec::new();
    let (mut window_loss, mut window_steps, mut window_targets, mut window_correct) = (0.0f64, 0usize, 0usize, 0usize);
    let mut steps_run = 0;
    for step in 0..config.steps {
        grads.reset();
        let batch = sampler.next_batch(config.batch_size);
        let scale = 1.0 / batch.len() as f32;
        let mut batch_loss = 0.0f64;
        for &i in &batch {
            let ex = &examples[i];
            let stats = accumulate_sequence_gradients(&weights, &ex.tokens, &ex.loss_mask, scale, &mut grads)
                .map_err(|e| ExperimentError::NonFiniteLoss { step, detail: e.to_string() })?;
            batch_loss += f64::from(stats.loss);
            window_targets += stats.targets;
            window_correct += stats.correct;
        }
        if config.grad_clip > 0.0 {
            let norm = grads.global_norm();
            if norm > config.grad_clip {
                grads.scale(config.grad_clip / norm);
            }
        }
        opt.set_lr(config.learning_rate(step));
        opt.step(&mut weights.store, &grads).map_err(|e| ExperimentError::NonFiniteLoss { step, detail: e.to_string() })?;
        window_loss += batch_loss / batch.len() as f64;
        window_steps += 1;
        steps_run = step + 1;
        let last = step + 1 == config.steps;
        if step % config.log_every == 0 || last {
            let point = LossPoint {
                step,
                loss: (window_loss / window_steps as f64) as f32,
                accuracy: window_correct as f32 / window_targets.max(1) as f32,
            };
            log::debug!("step {step} loss {:.4} acc {:.4}", point.loss, point.accuracy);
            curve.push(point);
            (window_loss, window_steps, window_targets, window_correct) = (0.0, 0, 0, 0);
            if monitor(step, &weights) == MonitorDecision::Stop {
                break;
            }
        }
    }
    Ok(TrainOutcome { weights, loss_curve: curve, steps_run, examples: examples.len() })
}
