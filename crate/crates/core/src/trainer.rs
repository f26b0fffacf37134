//! Seeded training loops for the DDO-RM distillation step and the DPO
//! baseline.
//!
//! Every quantity of a DDO-RM step (scores, policy distribution, centered
//! rewards, target) is recomputed from the current parameters; the target is
//! held fixed while differentiating the cross-entropy.

use crate::error::{invalid, Error, Result};
use crate::objectives::{ddorm_loss, ddorm_loss_grad, dpo_loss, dpo_loss_grad, DpoInputs};
use crate::policy::{apply_gradient, snapshot_reference, Policy, ReferenceSnapshot, Scorer};
use crate::simplex::{
    ddorm_target, expected_reward, kl_divergence, softmax_distribution, DdormStepParams,
    DecisionDistribution, RewardVector,
};
use crate::world::{rm_scores, PreferenceExample, RewardModelSim, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ddorm,
    Dpo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ddorm => "ddorm",
            Method::Dpo => "dpo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters of one training run. `eta` only matters for DDO-RM and
/// `beta` only for DPO; both are always recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        match self.method {
            Method::Ddorm => {
                DdormStepParams::new(self.eta, self.tau)?;
            }
            Method::Dpo => {
                if !(self.beta.is_finite() && self.beta > 0.0) {
                    return Err(invalid(format!("beta must be > 0, got {}", self.beta)));
                }
            }
        }
        Ok(())
    }
}

/// What the trainer samples from: prompts scored by a reward model for
/// DDO-RM, labelled pairs for DPO.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Ddorm { rm: &'a RewardModelSim, prompts: &'a [usize] },
    Dpo { examples: &'a [PreferenceExample] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub mean_loss: f64,
    /// Mean `KL(q‖p_θ)` over the batch (DDO-RM only).
    pub mean_kl: Option<f64>,
    /// Mean `⟨q, r⟩ − ⟨p_θ, r⟩` over the batch (DDO-RM only).
    pub mean_improvement: Option<f64>,
    pub min_improvement: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    /// One JSON object per line, newline-terminated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

/// Everything one DDO-RM step computes for a single prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct DdormStepOutput {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub policy_dist: DecisionDistribution,
    pub target: DecisionDistribution,
    pub rewards: RewardVector,
}

impl DdormStepOutput {
    pub fn kl_target_to_policy(&self) -> f64 {
        kl_divergence(&self.target, &self.policy_dist).expect("same length")
    }

    /// `⟨q, r⟩ − ⟨p, r⟩`; nonnegative up to rounding.
    pub fn improvement(&self) -> f64 {
        expected_reward(&self.target, &self.rewards).expect("same length")
            - expected_reward(&self.policy_dist, &self.rewards).expect("same length")
    }
}

/// One DDO-RM update for one prompt: scores, `p = softmax(s/τ)`, reward
/// scores, centering under `p`, target `q`, then `CE(q, p_θ)` and its
/// parameter gradient with `q` held fixed.
pub fn ddorm_step(
    policy: &Policy,
    world: &World,
    rm: &RewardModelSim,
    prompt: usize,
    params: &DdormStepParams,
) -> Result<DdormStepOutput> {
    let scores = policy.scores(world, prompt)?;
    let policy_dist = softmax_distribution(&scores);
    let rewards = rm_scores(rm, world, prompt)?;
    let target = ddorm_target(&scores, &rewards, params)?;
    let loss = ddorm_loss(&target, &policy_dist)?;
    let score_grads = ddorm_loss_grad(&target, &scores)?;
    let mut grads = vec![0.0; policy.num_params()];
    for (candidate, &g) in score_grads.iter().enumerate() {
        policy.accumulate_score_grad(world, prompt, candidate, g, &mut grads)?;
    }
    Ok(DdormStepOutput { loss, grads, policy_dist, target, rewards })
}

/// The DPO loss of one labelled pair, using policy and reference scores as
/// sequence log-probabilities, and its parameter gradient.
pub fn dpo_step(
    policy: &Policy,
    reference: &ReferenceSnapshot,
    world: &World,
    example: &PreferenceExample,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    let (prompt, chosen, rejected) = (example.prompt_id, example.chosen_id, example.rejected_id);
    let inputs = DpoInputs {
        policy_logp_chosen: policy.score(world, prompt, chosen)?,
        policy_logp_rejected: policy.score(world, prompt, rejected)?,
        ref_logp_chosen: reference.score(world, prompt, chosen)?,
        ref_logp_rejected: reference.score(world, prompt, rejected)?,
        beta,
    };
    let loss = dpo_loss(&inputs)?;
    let (g_chosen, g_rejected) = dpo_loss_grad(&inputs)?;
    let mut grads = vec![0.0; policy.num_params()];
    policy.accumulate_score_grad(world, prompt, chosen, g_chosen, &mut grads)?;
    policy.accumulate_score_grad(world, prompt, rejected, g_rejected, &mut grads)?;
    Ok((loss, grads))
}

/// Run `config.steps` mini-batch updates on `policy`.
///
/// Each step draws `batch_size` items with replacement from the
/// config-seeded stream, averages their gradients and takes one gradient
/// descent step. For DPO the reference is frozen before the first update.
pub fn train(
    config: &TrainConfig,
    world: &World,
    data: TrainData<'_>,
    mut policy: Policy,
) -> Result<(Policy, TrainLog)> {
    config.validate()?;
    if policy.temperature() != config.tau {
        return Err(invalid(format!(
            "policy temperature {} differs from configured tau {}",
            policy.temperature(),
            config.tau
        )));
    }
    let pool_len = match (config.method, data) {
        (Method::Ddorm, TrainData::Ddorm { rm, prompts }) => {
            rm.validate()?;
            prompts.len()
        }
        (Method::Dpo, TrainData::Dpo { examples }) => examples.len(),
        (method, _) => return Err(invalid(format!("training data does not match method {method}"))),
    };
    if pool_len == 0 {
        return Err(invalid("empty training pool"));
    }

    let reference = snapshot_reference(&policy, 0);
    let step_params = match config.method {
        Method::Ddorm => Some(DdormStepParams::new(config.eta, config.tau)?),
        Method::Dpo => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = TrainLog::default();
    let mut batch_grads = vec![0.0; policy.num_params()];

    for step in 0..config.steps {
        batch_grads.iter_mut().for_each(|g| *g = 0.0);
        let mut loss_sum = 0.0;
        let mut kl_sum = 0.0;
        let mut improvement_sum = 0.0;
        let mut improvement_min = f64::INFINITY;

        for _ in 0..config.batch_size {
            let item = rng.random_range(0..pool_len);
            let (loss, grads) = match data {
                TrainData::Ddorm { rm, prompts } => {
                    let params = step_params.as_ref().expect("validated for ddorm");
                    let out = ddorm_step(&policy, world, rm, prompts[item], params)?;
                    let improvement = out.improvement();
                    kl_sum += out.kl_target_to_policy();
                    improvement_sum += improvement;
                    improvement_min = improvement_min.min(improvement);
                    (out.loss, out.grads)
                }
                TrainData::Dpo { examples } => {
                    dpo_step(&policy, &reference, world, &examples[item], config.beta)?
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step, example: item, loss });
            }
            loss_sum += loss;
            for (acc, g) in batch_grads.iter_mut().zip(&grads) {
                *acc += g;
            }
        }

        let n = config.batch_size as f64;
        batch_grads.iter_mut().for_each(|g| *g /= n);
        apply_gradient(&mut policy, &batch_grads, config.learning_rate)?;

        let is_ddorm = config.method == Method::Ddorm;
        log.records.push(TrainRecord {
            step,
            mean_loss: loss_sum / n,
            mean_kl: is_ddorm.then_some(kl_sum / n),
            mean_improvement: is_ddorm.then_some(improvement_sum / n),
            min_improvement: is_ddorm.then_some(improvement_min),
        });
    }
    Ok((policy, log))
}
