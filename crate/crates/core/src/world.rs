//! Synthetic ground-truth worlds.
//!
//! A world is a set of prompts, each with K candidates described by feature
//! vectors. The true reward is linear in the features. Preferences are drawn
//! from a unit-scale Bradley–Terry model on the true reward, and a simulated
//! reward model perturbs the true reward with a monotone distortion, an
//! affine transform and frozen Gaussian noise.

use crate::error::{invalid, Result};
use crate::objectives::sigmoid;
use crate::simplex::{dot, RewardVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Derive an independent 64-bit seed for a named purpose from a run seed.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub num_prompts: usize,
    pub candidates_per_prompt: usize,
    pub feature_dim: usize,
    pub true_reward_weights: Vec<f64>,
    pub seed: u64,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_prompts == 0 {
            return Err(invalid("num_prompts must be >= 1"));
        }
        if self.candidates_per_prompt < 2 {
            return Err(invalid("candidates_per_prompt must be >= 2"));
        }
        if self.feature_dim == 0 {
            return Err(invalid("feature_dim must be >= 1"));
        }
        if self.true_reward_weights.len() != self.feature_dim {
            return Err(invalid(format!(
                "true_reward_weights has {} entries, feature_dim is {}",
                self.true_reward_weights.len(),
                self.feature_dim
            )));
        }
        if self.true_reward_weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("true_reward_weights must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    num_prompts: usize,
    candidates: usize,
    feature_dim: usize,
    true_reward_weights: Vec<f64>,
    /// `[prompt][candidate][dim]`, flattened.
    features: Vec<f64>,
    /// `[prompt][candidate]`, flattened.
    true_rewards: Vec<f64>,
}

/// Build a world with standard-normal candidate features.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_prompts * spec.candidates_per_prompt * spec.feature_dim;
    let features = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    World::from_features(
        spec.num_prompts,
        spec.candidates_per_prompt,
        spec.true_reward_weights.clone(),
        features,
    )
}

impl World {
    /// Assemble a world from explicit features laid out as
    /// `[prompt][candidate][dim]`.
    pub fn from_features(
        num_prompts: usize,
        candidates: usize,
        true_reward_weights: Vec<f64>,
        features: Vec<f64>,
    ) -> Result<Self> {
        let feature_dim = true_reward_weights.len();
        if num_prompts == 0 || candidates < 2 || feature_dim == 0 {
            return Err(invalid("world needs >= 1 prompt, >= 2 candidates, >= 1 feature"));
        }
        if features.len() != num_prompts * candidates * feature_dim {
            return Err(invalid(format!(
                "expected {} feature values, got {}",
                num_prompts * candidates * feature_dim,
                features.len()
            )));
        }
        if features.iter().chain(&true_reward_weights).any(|x| !x.is_finite()) {
            return Err(invalid("features and weights must be finite"));
        }
        let true_rewards = features
            .chunks_exact(feature_dim)
            .map(|f| dot(&true_reward_weights, f))
            .collect();
        Ok(Self {
            num_prompts,
            candidates,
            feature_dim,
            true_reward_weights,
            features,
            true_rewards,
        })
    }

    pub fn num_prompts(&self) -> usize {
        self.num_prompts
    }

    pub fn candidates_per_prompt(&self) -> usize {
        self.candidates
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn true_reward_weights(&self) -> &[f64] {
        &self.true_reward_weights
    }

    pub fn check_ids(&self, prompt: usize, candidate: usize) -> Result<()> {
        if prompt >= self.num_prompts {
            return Err(invalid(format!("prompt {prompt} out of range ({})", self.num_prompts)));
        }
        if candidate >= self.candidates {
            return Err(invalid(format!(
                "candidate {candidate} out of range ({})",
                self.candidates
            )));
        }
        Ok(())
    }

    pub fn features(&self, prompt: usize, candidate: usize) -> Result<&[f64]> {
        self.check_ids(prompt, candidate)?;
        let start = (prompt * self.candidates + candidate) * self.feature_dim;
        Ok(&self.features[start..start + self.feature_dim])
    }

    pub fn true_reward(&self, prompt: usize, candidate: usize) -> Result<f64> {
        self.check_ids(prompt, candidate)?;
        Ok(self.true_rewards[prompt * self.candidates + candidate])
    }

    pub fn true_rewards(&self, prompt: usize) -> Result<&[f64]> {
        self.check_ids(prompt, 0)?;
        let start = prompt * self.candidates;
        Ok(&self.true_rewards[start..start + self.candidates])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub prompt_id: usize,
    pub chosen_id: usize,
    pub rejected_id: usize,
}

impl PreferenceExample {
    pub fn new(world: &World, prompt_id: usize, chosen_id: usize, rejected_id: usize) -> Result<Self> {
        world.check_ids(prompt_id, chosen_id)?;
        world.check_ids(prompt_id, rejected_id)?;
        if chosen_id == rejected_id {
            return Err(invalid("chosen and rejected candidates must differ"));
        }
        Ok(Self { prompt_id, chosen_id, rejected_id })
    }
}

/// Split the prompt ids into disjoint (train, test) sets with a seeded
/// shuffle. `test_fraction` of the prompts (rounded, at least one on each
/// side) go to the test set. Both lists come back sorted.
pub fn partition_prompts(
    world: &World,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let n = world.num_prompts();
    if n < 2 {
        return Err(invalid("need at least 2 prompts to split"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher–Yates with the generator's own range sampling.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let mut test = ids[..n_test].to_vec();
    let mut train = ids[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Draw `n` Bradley–Terry labelled pairs from the given prompts.
///
/// Each draw picks a prompt uniformly from `prompts`, an unordered candidate
/// pair uniformly, and labels the first member chosen with probability
/// `σ(r*(a) − r*(b))`.
pub fn sample_preferences(
    world: &World,
    n: usize,
    split_seed: u64,
    prompts: &[usize],
) -> Result<Vec<PreferenceExample>> {
    if n == 0 {
        return Err(invalid("number of preference examples must be >= 1"));
    }
    if prompts.is_empty() {
        return Err(invalid("no prompts to sample from"));
    }
    let k = world.candidates_per_prompt();
    if k < 2 {
        return Err(invalid("preference sampling needs K >= 2"));
    }
    for &p in prompts {
        world.check_ids(p, 0)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let prompt_id = prompts[rng.random_range(0..prompts.len())];
        let a = rng.random_range(0..k);
        let mut b = rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        let gap = world.true_reward(prompt_id, a)? - world.true_reward(prompt_id, b)?;
        let u: f64 = rng.random();
        let (chosen_id, rejected_id) = if u < sigmoid(gap) { (a, b) } else { (b, a) };
        out.push(PreferenceExample { prompt_id, chosen_id, rejected_id });
    }
    Ok(out)
}

/// Monotone miscalibration applied to the scaled reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distortion {
    Identity,
    Cube,
    SignedSqrt,
}

impl Distortion {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Distortion::Identity => x,
            Distortion::Cube => x * x * x,
            Distortion::SignedSqrt => x.signum() * x.abs().sqrt(),
        }
    }
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distortion::Identity => "identity",
            Distortion::Cube => "cube",
            Distortion::SignedSqrt => "signed-sqrt",
        })
    }
}

impl FromStr for Distortion {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Distortion::Identity),
            "cube" => Ok(Distortion::Cube),
            "signed-sqrt" => Ok(Distortion::SignedSqrt),
            other => Err(invalid(format!("unknown distortion {other:?}"))),
        }
    }
}

/// Simulated reward model: `distortion(scale · r* + bias) + ε` with
/// `ε ~ N(0, noise_std²)` frozen per (seed, prompt, candidate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardModelSim {
    pub noise_std: f64,
    pub scale: f64,
    pub bias: f64,
    pub distortion: Distortion,
    pub seed: u64,
}

impl Default for RewardModelSim {
    fn default() -> Self {
        Self::exact()
    }
}

impl RewardModelSim {
    /// Reproduces the true reward.
    pub fn exact() -> Self {
        Self {
            noise_std: 0.0,
            scale: 1.0,
            bias: 0.0,
            distortion: Distortion::Identity,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(invalid(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(invalid(format!("scale must be > 0, got {}", self.scale)));
        }
        if !self.bias.is_finite() {
            return Err(invalid("bias must be finite"));
        }
        Ok(())
    }

    fn noise(&self, world: &World, prompt: usize, candidate: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((prompt * world.candidates_per_prompt() + candidate) as u64);
        let z: f64 = rng.sample(StandardNormal);
        self.noise_std * z
    }
}

pub fn rm_score(sim: &RewardModelSim, world: &World, prompt: usize, candidate: usize) -> Result<f64> {
    sim.validate()?;
    let truth = world.true_reward(prompt, candidate)?;
    let mut score = sim.distortion.apply(sim.scale * truth + sim.bias);
    if sim.noise_std > 0.0 {
        score += sim.noise(world, prompt, candidate);
    }
    Ok(score)
}

/// Reward-model scores for every candidate of one prompt.
pub fn rm_scores(sim: &RewardModelSim, world: &World, prompt: usize) -> Result<RewardVector> {
    let scores = (0..world.candidates_per_prompt())
        .map(|c| rm_score(sim, world, prompt, c))
        .collect::<Result<Vec<_>>>()?;
    RewardVector::new(scores)
}
