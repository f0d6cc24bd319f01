//! Dataset building, training, closed-loop evaluation and ablations.

mod ablation;
mod data;
mod eval;
mod rollout;
mod train;

pub use ablation::{
    aggregate, format_mean_stderr, run_ablation, run_cell, AblationCell, AblationGrid, AblationResult, AggregateRow, CellOutcome,
};
pub use data::{
    annotate_all, build_examples, build_training_batches, decode_prompt, EpochSampler, WorldContext,
};
pub use eval::{
    answer_fidelity, evaluate, evaluate_with, split_seed, EvalReport, EvalSuite, FidelityReport, SplitReport, SplitSpec, SplitTiming,
    TimingReport,
};
pub use rollout::{rollout, rollout_with, Decision, DecisionRecord, RolloutConfig, RolloutResult};
pub use train::{train, train_with_monitor, LossPoint, MonitorDecision, TrainConfig, TrainOutcome};

use crate::autodiff::AutodiffError;
use crate::labeler::LabelError;
use crate::policy::PolicyError;
use crate::prompting::PromptError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
