use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::labeler::{extract_object_names, label_for, resolve_object, Answer, LabelError, VqaFormulation};
use crate::policy::{attention_mass_on_span, decode_two_step, TransformerWeights};
use crate::prompting::{PromptLayout, ACTION_PAD};
use crate::sim::{is_success, object_block_range, step, Action, Scene, Task};

use super::data::{decode_prompt, WorldContext};
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    pub chunk: usize,
    /// Every executed slot, pads included, counts as one step.
    pub max_steps: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self { formulation: VqaFormulation::None, layout: PromptLayout::VqaFirst, chunk: 5, max_steps: 48 }
    }
}

/// One decode call during a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: usize,
    /// Decoded answers, one per question, in compact text form.
    pub answers: Vec<String>,
    /// Rule-engine answers for the same scene.
    pub truth: Vec<String>,
    pub actions: Vec<String>,
    /// Final-layer attention from action-emitting positions onto the target's observation block.
    pub target_attention: f64,
    /// Same onto the beacon's observation block.
    pub beacon_attention: f64,
    #[serde(skip)]
    pub decode_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub success: bool,
    pub steps: usize,
    pub decisions: Vec<DecisionRecord>,
}

/// What one decode call produced: the slots to execute (`None` is a pad,
/// which spends a step without moving) and its diagnostics.
pub struct Decision {
    pub slots: Vec<Option<Action>>,
    pub answers: Vec<String>,
    pub truth: Vec<String>,
    pub target_attention: f64,
    pub beacon_attention: f64,
    pub decode_seconds: f64,
}

/// Episode loop shared by every policy: ask `decide` for a chunk, execute
/// all of it, repeat until success or the step budget runs out.
pub fn rollout_with<E>(
    scene: &Scene,
    task: &Task,
    max_steps: usize,
    mut decide: impl FnMut(&Scene) -> Result<Decision, E>,
) -> Result<RolloutResult, E> {
    let mut current = scene.clone();
    let mut steps = 0;
    let mut decisions = Vec::new();
    while steps < max_steps && !is_success(&current, task) {
        let d = decide(&current)?;
        let mut executed = Vec::with_capacity(d.slots.len());
        for slot in &d.slots {
            if steps >= max_steps || is_success(&current, task) {
                break;
            }
            if let Some(action) = slot {
                current = step(&current, *action);
            }
            executed.push(slot.map_or(ACTION_PAD, Action::word).to_string());
            steps += 1;
        }
        if d.slots.is_empty() {
            // a policy that never acts would loop forever
            steps = max_steps;
        }
        decisions.push(DecisionRecord {
            step: steps - executed.len(),
            answers: d.answers,
            truth: d.truth,
            actions: executed,
            target_attention: d.target_attention,
            beacon_attention: d.beacon_attention,
            decode_seconds: d.decode_seconds,
        });
    }
    Ok(RolloutResult { success: is_success(&current, task), steps, decisions })
}

/// Closed-loop rollout of the transformer policy: observe, decode answers
/// then a chunk of actions, execute the whole chunk, re-observe.
pub fn rollout(
    weights: &TransformerWeights,
    ctx: &WorldContext,
    scene: &Scene,
    task: &Task,
    config: &RolloutConfig,
) -> Result<RolloutResult, ExperimentError> {
    let names = if config.formulation.is_none() {
        Vec::new()
    } else {
        extract_object_names(&task.instruction, &ctx.lexicon)?
    };
    rollout_with(scene, task, config.max_steps, |current| {
        let prompt = decode_prompt(ctx, current, task, config.formulation)?;
        let started = Instant::now();
        let decoded = decode_two_step(weights, &ctx.vocab, &prompt, config.formulation, config.layout, config.chunk)?;
        let decode_seconds = started.elapsed().as_secs_f64();

        let mut answers = Vec::with_capacity(names.len());
        let mut truth = Vec::with_capacity(names.len());
        for (name, ids) in names.iter().zip(&decoded.answers) {
            let words = ctx.vocab.decode(ids);
            answers.push(
                Answer::from_words(config.formulation, &words).map_or_else(|| words.concat(), |a| a.to_string()),
            );
            let obj = resolve_object(current, name).ok_or_else(|| LabelError::UnresolvedObject(name.clone()))?;
            let grasped = current.held_object == Some(obj.id);
            let label = label_for(config.formulation, current.gripper_position, obj.position, grasped, &ctx.rules)
                .expect("formulation is not None");
            truth.push(label.to_string());
        }

        let spans = &decoded.sequence.spans;
        let queries = spans.actions.start - 1..spans.actions.end - 1;
        let mass = |id: Option<u32>| -> Result<f64, ExperimentError> {
            match id.and_then(|id| object_block_range(current, id)) {
                Some(r) => Ok(attention_mass_on_span(
                    &decoded.attention,
                    queries.clone(),
                    spans.obs.start + r.start..spans.obs.start + r.end,
                )?),
                None => Ok(0.0),
            }
        };
        Ok(Decision {
            slots: decoded.actions.iter().map(|&id| ctx.vocab.action_of(id)).collect(),
            answers,
            truth,
            target_attention: mass(Some(task.target_object_id))?,
            beacon_attention: mass(current.beacon().map(|b| b.id))?,
            decode_seconds,
        })
    })
}
