use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::labeler::{
    annotate_trajectory, extract_object_names, Answer, AnnotatedTrajectory, LabelRuleConfig, PositionSource,
    VqaFormulation,
};
use crate::policy::DecodePrompt;
use crate::prompting::{
    actions_to_tokens, assemble_sequence, render_answer, render_question, PromptLayout, QaPair, SequenceSegments,
    Vocabulary,
};
use crate::sim::{encode_observation, stream_seed, Lexicon, Scene, Task, Trajectory};

use super::ExperimentError;

/// Vocabulary, lexicon and labeling rules shared by every stage of one world.
#[derive(Debug, Clone)]
pub struct WorldContext {
    pub vocab: Vocabulary,
    pub lexicon: Lexicon,
    pub rules: LabelRuleConfig,
}

impl WorldContext {
    pub fn new(world_size: i32, lexicon: Lexicon) -> Result<Self, ExperimentError> {
        lexicon.validate()?;
        let vocab = Vocabulary::build(world_size, &lexicon)?;
        Ok(Self { vocab, lexicon, rules: LabelRuleConfig::for_world(world_size) })
    }
}

/// Prompt for one observation: questions for every object named in the instruction.
pub fn decode_prompt(
    ctx: &WorldContext,
    scene: &Scene,
    task: &Task,
    formulation: VqaFormulation,
) -> Result<DecodePrompt, ExperimentError> {
    let obs = ctx.vocab.encode(&encode_observation(scene, &ctx.lexicon)?)?;
    let instruction = ctx.vocab.encode(&task.instruction)?;
    let questions = if formulation.is_none() {
        Vec::new()
    } else {
        extract_object_names(&task.instruction, &ctx.lexicon)?
            .iter()
            .map(|name| render_question(&ctx.vocab, &ctx.lexicon, formulation, name))
            .collect::<Result<_, _>>()?
    };
    Ok(DecodePrompt { obs, questions, instruction })
}

pub fn annotate_all(
    trajs: &[Trajectory],
    formulation: VqaFormulation,
    ctx: &WorldContext,
    source: PositionSource,
) -> Result<Vec<AnnotatedTrajectory>, ExperimentError> {
    trajs
        .iter()
        .map(|t| Ok(annotate_trajectory(t, formulation, &ctx.rules, &ctx.lexicon, source)?))
        .collect()
}

/// One example per trajectory step: ground-truth answers teacher-forced and
/// the next `h` expert actions as targets.
pub fn build_examples(
    trajs: &[AnnotatedTrajectory],
    formulation: VqaFormulation,
    layout: PromptLayout,
    h: usize,
    ctx: &WorldContext,
    context_len: usize,
) -> Result<Vec<SequenceSegments>, ExperimentError> {
    if h == 0 {
        return Err(ExperimentError::InvalidConfig("action chunk must be at least 1".into()));
    }
    let mut out = Vec::new();
    for traj in trajs {
        let instruction = ctx.vocab.encode(&traj.task.instruction)?;
        let actions: Vec<_> = traj.steps.iter().map(|s| s.action).collect();
        for (i, step) in traj.steps.iter().enumerate() {
            if !formulation.is_none() && step.qa.is_empty() {
                return Err(ExperimentError::InvalidConfig("trajectory lacks annotations".into()));
            }
            let obs = ctx.vocab.encode(&encode_observation(&step.scene, &ctx.lexicon)?)?;
            let qa = step
                .qa
                .iter()
                .map(|r| {
                    let answer = Answer::parse(formulation, &r.answer)
                        .ok_or_else(|| ExperimentError::InvalidConfig(format!("unparseable answer {:?}", r.answer)))?;
                    Ok(QaPair {
                        object: r.object.clone(),
                        question: ctx.vocab.encode(&r.question_words())?,
                        answer: render_answer(&ctx.vocab, &answer),
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let chunk = actions_to_tokens(&ctx.vocab, &actions[i..], h);
            out.push(assemble_sequence(&ctx.vocab, &obs, &qa, &instruction, &chunk, layout, formulation, context_len)?);
        }
    }
    Ok(out)
}

/// Walks the dataset in epochs, reshuffling deterministically at each epoch start.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    n: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl EpochSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut s = Self { n, seed, epoch: 0, order: Vec::new(), pos: 0 };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.seed, self.epoch));
        self.order.shuffle(&mut rng);
        self.pos = 0;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Next `batch` indices; a batch may span an epoch boundary.
    pub fn next_batch(&mut self, batch: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(batch);
        while out.len() < batch && self.n > 0 {
            if self.pos == self.n {
                self.epoch += 1;
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Fixed-size batches covering `epochs` passes over the examples.
pub fn build_training_batches(
    examples: &[SequenceSegments],
    batch: usize,
    epochs: usize,
    seed: u64,
) -> Vec<Vec<(Vec<u32>, Vec<u8>)>> {
    let mut sampler = EpochSampler::new(examples.len(), seed);
    let total = examples.len() * epochs;
    let mut out = Vec::new();
    let mut produced = 0;
    while produced < total {
        let take = batch.min(total - produced);
        let idx = sampler.next_batch(take);
        produced += idx.len();
        out.push(idx.into_iter().map(|i| (examples[i].tokens.clone(), examples[i].loss_mask.clone())).collect());
    }
    out
}
