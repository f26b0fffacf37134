//! Experiment configuration. JSON, unknown keys rejected.

use crate::error::{read_file, CliError, Result};
use ddorm_core::{Method, RewardModelSim, TrainConfig, WorldSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEEDS: [u64; 3] = [42, 13, 3407];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// One logit per (prompt, candidate); cannot generalize to unseen prompts.
    Tabular,
    /// Shared weight vector over candidate features.
    Linear,
}

/// How prompts and labelled pairs are split between training and the
/// held-out evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    pub test_prompt_fraction: f64,
    pub train_pairs: usize,
    pub test_pairs: usize,
}

/// Per-method hyperparameters. The seed comes from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSettings {
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
}

impl MethodSettings {
    pub fn train_config(&self, method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            eta: self.eta,
            tau: self.tau,
            beta: self.beta,
            learning_rate: self.learning_rate,
            steps: self.steps,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub policy: PolicyKind,
    pub evaluation: EvaluationSpec,
    pub reward_model: RewardModelSim,
    pub ddorm: MethodSettings,
    pub dpo: MethodSettings,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Pairwise default: 200 prompts, two candidates, eight features.
    fn default() -> Self {
        let settings = MethodSettings {
            eta: 2.0,
            tau: 1.0,
            beta: 0.1,
            learning_rate: 0.1,
            steps: 3000,
            batch_size: 16,
        };
        Self {
            world: WorldSpec {
                num_prompts: 200,
                candidates_per_prompt: 2,
                feature_dim: 8,
                true_reward_weights: vec![1.0, -0.8, 0.6, 0.5, -0.4, 0.3, -0.2, 0.1],
                seed: 2024,
            },
            policy: PolicyKind::Linear,
            evaluation: EvaluationSpec {
                test_prompt_fraction: 0.25,
                train_pairs: 1500,
                test_pairs: 500,
            },
            reward_model: RewardModelSim::exact(),
            ddorm: settings,
            dpo: settings,
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// The default with four candidates per prompt.
    pub fn multi_candidate() -> Self {
        let mut config = Self::default();
        config.world.candidates_per_prompt = 4;
        config
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Semantic checks; each error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &'static str| move |e: ddorm_core::Error| CliError::Config(format!("{name}: {e}"));
        self.world.validate().map_err(field("world"))?;
        self.reward_model.validate().map_err(field("reward_model"))?;
        self.ddorm.train_config(Method::Ddorm, 0).validate().map_err(field("ddorm"))?;
        self.dpo.train_config(Method::Dpo, 0).validate().map_err(field("dpo"))?;

        let eval = &self.evaluation;
        if !(eval.test_prompt_fraction > 0.0 && eval.test_prompt_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "evaluation.test_prompt_fraction must lie in (0, 1), got {}",
                eval.test_prompt_fraction
            )));
        }
        let test_prompts = (self.world.num_prompts as f64 * eval.test_prompt_fraction).round();
        if test_prompts < 1.0 || test_prompts >= self.world.num_prompts as f64 {
            return Err(CliError::Config(
                "evaluation.test_prompt_fraction leaves an empty train or test split".into(),
            ));
        }
        if eval.train_pairs == 0 || eval.test_pairs == 0 {
            return Err(CliError::Config("evaluation.train_pairs and evaluation.test_pairs must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(CliError::Config("seeds: duplicate seed".into()));
        }
        Ok(())
    }

    pub fn settings(&self, method: Method) -> &MethodSettings {
        match method {
            Method::Ddorm => &self.ddorm,
            Method::Dpo => &self.dpo,
        }
    }

    /// `--out` wins over the config's `output_dir`.
    pub fn resolve_output(&self, cli_out: Option<&Path>) -> Result<PathBuf> {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
    }
}
