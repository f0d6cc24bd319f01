use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labeler::{extract_object_names, label_for, resolve_object, LabelError, VqaFormulation};
use crate::policy::{decode_answers, TransformerWeights};
use crate::prompting::PromptLayout;
use crate::sim::{generate_scene, stream_seed, LexiconSplit, Scene, SceneGenConfig, Task, Trajectory};

use super::data::{decode_prompt, WorldContext};
use super::rollout::{rollout, RolloutConfig, RolloutResult};
use super::ExperimentError;

const EVAL_SEED_SALT: u64 = 0xE7A1_0000_0000_0000;

/// One evaluation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub name: String,
    /// Beacon adjacency probability; `None` keeps the training value.
    pub rho: Option<f64>,
    pub lexicon: LexiconSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSuite {
    pub splits: Vec<SplitSpec>,
    pub trials: usize,
    pub max_steps: usize,
    /// Master seed of every evaluation scene stream; kept apart from the
    /// training streams by a fixed salt.
    pub seed: u64,
}

impl Default for EvalSuite {
    fn default() -> Self {
        Self::standard(100, 48, 0)
    }
}

impl EvalSuite {
    /// Seen, beacon-decorrelated, held-out-lexicon, and both shifts at once.
    pub fn standard(trials: usize, max_steps: usize, seed: u64) -> Self {
        let split = |name: &str, rho: Option<f64>, lexicon| SplitSpec { name: name.into(), rho, lexicon };
        Self {
            splits: vec![
                split("seen", None, LexiconSplit::Seen),
                split("unseen_decorrelated", Some(0.0), LexiconSplit::Seen),
                split("unseen_lexicon", None, LexiconSplit::Unseen),
                split("unseen_both", Some(0.0), LexiconSplit::Unseen),
            ],
            trials,
            max_steps,
            seed,
        }
    }

    pub fn only(mut self, names: &[&str]) -> Self {
        self.splits.retain(|s| names.contains(&s.name.as_str()));
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.splits.is_empty() || self.trials == 0 {
            return Err(ExperimentError::InvalidConfig("suite needs at least one split and one trial".into()));
        }
        Ok(())
    }

    /// Scene config of split `index` given the training scene config.
    pub fn scene_config(&self, index: usize, train: &SceneGenConfig) -> SceneGenConfig {
        let spec = &self.splits[index];
        SceneGenConfig {
            rho: spec.rho.unwrap_or(train.rho),
            split: spec.lexicon,
            seed: split_seed(self.seed, index),
            ..train.clone()
        }
    }
}

/// Master seed of split `index`; trial `i` uses `stream_seed(split_seed, i)`.
pub fn split_seed(suite_seed: u64, index: usize) -> u64 {
    stream_seed(suite_seed ^ EVAL_SEED_SALT, index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub name: String,
    pub rho: f64,
    pub lexicon: LexiconSplit,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub answers_checked: usize,
    pub answers_correct: usize,
    pub answer_accuracy: Option<f64>,
    /// Mean over all decisions of attention mass on the target block.
    pub target_attention: f64,
    pub beacon_attention: f64,
    /// Same, restricted to each trial's first decision, whose scene is
    /// identical across models evaluated on the same suite.
    pub initial_target_attention: f64,
    pub initial_beacon_attention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    pub chunk: usize,
    /// Effective configuration that produced this report.
    pub config: serde_json::Value,
    pub splits: Vec<SplitReport>,
}

impl EvalReport {
    pub fn split(&self, name: &str) -> Option<&SplitReport> {
        self.splits.iter().find(|s| s.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "split,formulation,layout,seed,trials,successes,success_rate,mean_steps,answer_accuracy,target_attention,beacon_attention\n",
        );
        for r in &self.splits {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.name,
                self.formulation.name(),
                self.layout.name(),
                self.seed,
                r.trials,
                r.successes,
                r.success_rate,
                r.mean_steps,
                r.answer_accuracy.map_or_else(String::new, |a| a.to_string()),
                r.target_attention,
                r.beacon_attention
            ));
        }
        s
    }
}

/// Wall-clock of the decode call alone; kept out of [`EvalReport`] so that
/// reports stay byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTiming {
    pub name: String,
    pub decisions: usize,
    pub decoded_tokens: usize,
    pub mean_seconds_per_decision: f64,
    pub mean_seconds_per_action: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub splits: Vec<SplitTiming>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Runs `suite.trials` closed-loop trials per split of the transformer policy.
pub fn evaluate(
    weights: &TransformerWeights,
    ctx: &WorldContext,
    suite: &EvalSuite,
    train_scene: &SceneGenConfig,
    rollout_config: RolloutConfig,
    config_echo: serde_json::Value,
) -> Result<(EvalReport, TimingReport), ExperimentError> {
    evaluate_with(suite, train_scene, rollout_config, config_echo, |scene, task, rc| {
        rollout(weights, ctx, scene, task, rc)
    })
}

/// Suite bookkeeping around an arbitrary per-trial rollout.
pub fn evaluate_with(
    suite: &EvalSuite,
    train_scene: &SceneGenConfig,
    rollout_config: RolloutConfig,
    config_echo: serde_json::Value,
    mut run_trial: impl FnMut(&Scene, &Task, &RolloutConfig) -> Result<RolloutResult, ExperimentError>,
) -> Result<(EvalReport, TimingReport), ExperimentError> {
    suite.validate()?;
    let rc = RolloutConfig { max_steps: suite.max_steps, ..rollout_config };
    let mut splits = Vec::new();
    let mut timings = Vec::new();
    for (index, spec) in suite.splits.iter().enumerate() {
        let scene_cfg = suite.scene_config(index, train_scene);
        let (mut successes, mut steps) = (0usize, Vec::new());
        let (mut checked, mut correct) = (0usize, 0usize);
        let (mut target, mut beacon, mut first_target, mut first_beacon) = (vec![], vec![], vec![], vec![]);
        let (mut decode_secs, mut decisions, mut actions) = (0.0f64, 0usize, 0usize);
        for trial in 0..suite.trials {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scene_cfg.seed, trial as u64));
            let (scene, task) = generate_scene(&scene_cfg, &mut rng)?;
            let result = run_trial(&scene, &task, &rc)?;
            successes += usize::from(result.success);
            steps.push(result.steps as f64);
            for (k, d) in result.decisions.iter().enumerate() {
                for (a, t) in d.answers.iter().zip(&d.truth) {
                    checked += 1;
                    correct += usize::from(a == t);
                }
                target.push(d.target_attention);
                beacon.push(d.beacon_attention);
                if k == 0 {
                    first_target.push(d.target_attention);
                    first_beacon.push(d.beacon_attention);
                }
                decode_secs += d.decode_seconds;
                decisions += 1;
                actions += rc.chunk;
            }
        }
        splits.push(SplitReport {
            name: spec.name.clone(),
            rho: scene_cfg.rho,
            lexicon: spec.lexicon,
            trials: suite.trials,
            successes,
            success_rate: successes as f64 / suite.trials as f64,
            mean_steps: mean(&steps),
            answers_checked: checked,
            answers_correct: correct,
            answer_accuracy: (checked > 0).then(|| correct as f64 / checked as f64),
            target_attention: mean(&target),
            beacon_attention: mean(&beacon),
            initial_target_attention: mean(&first_target),
            initial_beacon_attention: mean(&first_beacon),
        });
        timings.push(SplitTiming {
            name: spec.name.clone(),
            decisions,
            decoded_tokens: actions,
            mean_seconds_per_decision: decode_secs / decisions.max(1) as f64,
            mean_seconds_per_action: decode_secs / actions.max(1) as f64,
        });
    }
    let report = EvalReport {
        seed: suite.seed,
        formulation: rc.formulation,
        layout: rc.layout,
        chunk: rc.chunk,
        config: config_echo,
        splits,
    };
    Ok((report, TimingReport { splits: timings }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub steps: usize,
    pub answers_checked: usize,
    pub answers_correct: usize,
    pub accuracy: f64,
}

/// Decodes answers on up to `max_steps` demonstration steps and scores them
/// against the rule engine applied to each step's scene.
pub fn answer_fidelity(
    weights: &TransformerWeights,
    ctx: &WorldContext,
    trajectories: &[Trajectory],
    formulation: VqaFormulation,
    layout: PromptLayout,
    max_steps: usize,
) -> Result<FidelityReport, ExperimentError> {
    if formulation.is_none() {
        return Err(ExperimentError::InvalidConfig("answer fidelity needs a question formulation".into()));
    }
    let (mut steps, mut checked, mut correct) = (0usize, 0usize, 0usize);
    'outer: for traj in trajectories {
        let names = extract_object_names(&traj.task.instruction, &ctx.lexicon)?;
        for st in &traj.steps {
            if steps == max_steps {
                break 'outer;
            }
            steps += 1;
            let prompt = decode_prompt(ctx, &st.scene, &traj.task, formulation)?;
            let answers = decode_answers(weights, &ctx.vocab, &prompt, formulation, layout)?;
            for (name, ids) in names.iter().zip(&answers) {
                let obj = resolve_object(&st.scene, name).ok_or_else(|| LabelError::UnresolvedObject(name.clone()))?;
                let truth = label_for(
                    formulation,
                    st.scene.gripper_position,
                    obj.position,
                    st.scene.held_object == Some(obj.id),
                    &ctx.rules,
                )
                .expect("formulation is not None");
                checked += 1;
                correct += usize::from(ctx.vocab.decode(ids) == truth.words());
            }
        }
    }
    Ok(FidelityReport {
        steps,
        answers_checked: checked,
        answers_correct: correct,
        accuracy: correct as f64 / checked.max(1) as f64,
    })
}
