//! Run configuration file: every numeric hyperparameter of every stage.

use std::path::Path;

use inspire_core::autodiff::AdamWConfig;
use inspire_core::experiment::{AblationGrid, EvalSuite, TrainConfig};
use inspire_core::labeler::{LabelRuleConfig, VqaFormulation};
use inspire_core::policy::{GradcheckConfig, ModelConfig};
use inspire_core::prompting::PromptLayout;
use inspire_core::sim::SceneGenConfig;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "INSPIRE_SEED";

/// Training hyperparameters; scene, model and seed come from their own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub num_trajectories: usize,
    pub formulation: VqaFormulation,
    pub layout: PromptLayout,
    pub chunk: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub optimizer: AdamWConfig,
    pub warmup_steps: usize,
    pub min_lr_ratio: f32,
    pub grad_clip: f32,
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            num_trajectories: t.num_trajectories,
            formulation: t.formulation,
            layout: t.layout,
            chunk: t.chunk,
            batch_size: t.batch_size,
            steps: t.steps,
            optimizer: t.optimizer,
            warmup_steps: t.warmup_steps,
            min_lr_ratio: t.min_lr_ratio,
            grad_clip: t.grad_clip,
            log_every: t.log_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required unless the seed environment variable is set.
    pub seed: Option<u64>,
    #[serde(default)]
    pub scene: SceneGenConfig,
    /// Defaults to the rules derived from `scene.world_size`.
    #[serde(default)]
    pub labels: Option<LabelRuleConfig>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSuite,
    #[serde(default)]
    pub ablation: AblationGrid,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scene: SceneGenConfig::default(),
            labels: None,
            model: ModelConfig::default(),
            train: TrainSection::default(),
            eval: EvalSuite::default(),
            ablation: AblationGrid::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no master seed: set `seed` in the config or {SEED_ENV}")]
    MissingSeed,
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    BadSeedEnv(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` (or all defaults when absent), applies the seed override
    /// and resolves every derived field.
    pub fn load(path: Option<&Path>, seed_env: Option<String>) -> Result<Self, ConfigError> {
        let raw = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        raw.resolve(seed_env)
    }

    pub fn resolve(mut self, seed_env: Option<String>) -> Result<Self, ConfigError> {
        if let Some(s) = seed_env {
            self.seed = Some(s.trim().parse().map_err(|_| ConfigError::BadSeedEnv(s.clone()))?);
        }
        let seed = self.seed.ok_or(ConfigError::MissingSeed)?;
        self.scene.seed = seed;
        self.eval.seed = seed;
        self.model.seed = seed;
        if self.labels.is_none() {
            self.labels = Some(LabelRuleConfig::for_world(self.scene.world_size));
        }
        self.scene.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.labels()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.optimizer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved config has a seed")
    }

    pub fn labels(&self) -> LabelRuleConfig {
        self.labels.clone().unwrap_or_else(|| LabelRuleConfig::for_world(self.scene.world_size))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            scene: self.scene.clone(),
            num_trajectories: t.num_trajectories,
            formulation: t.formulation,
            layout: t.layout,
            chunk: t.chunk,
            model: self.model,
            batch_size: t.batch_size,
            steps: t.steps,
            optimizer: t.optimizer,
            warmup_steps: t.warmup_steps,
            min_lr_ratio: t.min_lr_ratio,
            grad_clip: t.grad_clip,
            log_every: t.log_every,
            seed: self.seed(),
        }
    }

    /// Effective configuration as embedded in output artifacts.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_needs_a_seed() {
        assert!(matches!(RunConfig::parse("").unwrap().resolve(None), Err(ConfigError::MissingSeed)));
        let c = RunConfig::parse("").unwrap().resolve(Some("12".into())).unwrap();
        assert_eq!(c.seed(), 12);
        assert_eq!(c.scene.seed, 12);
    }

    #[test]
    fn env_overrides_file_seed() {
        let c = RunConfig::parse("seed = 3").unwrap().resolve(Some("9".into())).unwrap();
        assert_eq!(c.seed(), 9);
        assert!(RunConfig::parse("seed = 3").unwrap().resolve(Some("x".into())).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("seed = 1\nbogus = 2").is_err());
        assert!(RunConfig::parse("seed = 1\n[model]\nwidth = 3").is_err());
        assert!(RunConfig::parse("seed = 1\n[train]\nformulation = \"sideways\"").is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let text = "seed = 5\n[scene]\nrho = 0.5\n[model]\nd_model = 32\n[train]\nformulation = \"direction1d\"\nlayout = \"instruct_first\"\nsteps = 7\n[eval]\ntrials = 3";
        let c = RunConfig::parse(text).unwrap().resolve(None).unwrap();
        let t = c.train_config();
        assert_eq!(t.scene.rho, 0.5);
        assert_eq!(t.model.d_model, 32);
        assert_eq!(t.formulation, VqaFormulation::Direction1D);
        assert_eq!(t.layout, PromptLayout::InstructFirst);
        assert_eq!(t.steps, 7);
        assert_eq!(c.eval.trials, 3);
        assert_eq!(c.labels().workspace_diagonal, 5.0 * 3f64.sqrt());
        // the echo parses back to the same config
        let back: RunConfig = serde_json::from_value(c.echo()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_are_reported() {
        assert!(matches!(
            RunConfig::parse("seed = 1\n[scene]\nrho = 2.0").unwrap().resolve(None),
            Err(ConfigError::Invalid(_))
        ));
    }
}
