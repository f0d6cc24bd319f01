//! Integer-grid tabletop world: scene generation with a tunable beacon/target
//! correlation, deterministic dynamics, a scripted expert, and symbolic
//! observations.

mod dataset;
mod dynamics;
mod generate;
mod observation;
mod types;

use thiserror::Error;

pub use dataset::{
    read_jsonl, read_trajectories, write_jsonl, write_trajectories, DatasetHeader, FORMAT_VERSION, TRAJECTORY_FORMAT,
};
pub use dynamics::{expert_policy, greedy_move, is_success, step};
pub use generate::{
    expert_rollout, expert_step_budget, generate_demonstrations, generate_scene, lift_goal, stream_seed, Lexicon,
    LexiconSplit, SceneGenConfig, TaskTemplate,
};
pub use observation::{
    encode_observation, object_block_range, observation_len, observation_words, position_words, GRIPPER_BLOCK_LEN,
    OBJECT_BLOCK_LEN,
};
pub use types::{Action, GoalRegion, Scene, SceneObject, Task, Trajectory, TrajectoryStep, Vec3};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("world too small: {0}")]
    WorldTooSmall(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("word {0:?} is not in the lexicon")]
    UnknownWord(String),
    #[error("expert exceeded its {budget}-step budget on scene {index}")]
    ExpertBudgetExceeded { index: usize, budget: usize },
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
