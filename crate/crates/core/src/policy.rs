//! Toy scorers standing in for a language model.
//!
//! A policy assigns a scalar score to each (prompt, candidate) pair. The
//! tabular family stores one free logit per pair; the linear family scores
//! a candidate by the dot product of a weight vector with its features and
//! so generalizes to prompts it never saw during training.

use crate::error::{check_len, invalid, Result};
use crate::simplex::{dot, softmax, DecisionDistribution, ScoreVector};
use crate::world::World;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Scale of the random initialization of linear weights.
pub const LINEAR_INIT_SCALE: f64 = 0.1;

/// Anything that can score a candidate of a prompt in a world.
pub trait Scorer {
    fn score(&self, world: &World, prompt: usize, candidate: usize) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    num_prompts: usize,
    num_candidates: usize,
    /// Row-major `[prompt][candidate]`.
    logits: Vec<f64>,
    temperature: f64,
}

impl TabularPolicy {
    /// All-zero logits: uniform decision distributions everywhere.
    pub fn zeros(num_prompts: usize, num_candidates: usize, temperature: f64) -> Result<Self> {
        Self::from_logits(num_prompts, num_candidates, vec![0.0; num_prompts * num_candidates], temperature)
    }

    pub fn from_logits(
        num_prompts: usize,
        num_candidates: usize,
        logits: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        check_len(num_prompts * num_candidates, logits.len())?;
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(invalid("tabular logits must be finite"));
        }
        check_temperature(temperature)?;
        Ok(Self { num_prompts, num_candidates, logits, temperature })
    }

    fn index(&self, prompt: usize, candidate: usize) -> Result<usize> {
        if prompt >= self.num_prompts || candidate >= self.num_candidates {
            return Err(invalid(format!(
                "(prompt {prompt}, candidate {candidate}) outside {}x{} table",
                self.num_prompts, self.num_candidates
            )));
        }
        Ok(prompt * self.num_candidates + candidate)
    }

    pub fn score(&self, prompt: usize, candidate: usize) -> Result<f64> {
        Ok(self.logits[self.index(prompt, candidate)?])
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    weights: Vec<f64>,
    temperature: f64,
}

impl LinearPolicy {
    pub fn new(weights: Vec<f64>, temperature: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("linear weights must be non-empty and finite"));
        }
        check_temperature(temperature)?;
        Ok(Self { weights, temperature })
    }

    /// Weights drawn as `0.1 · N(0, 1)` from a generator seeded with `seed`.
    pub fn random(dim: usize, temperature: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..dim)
            .map(|_| LINEAR_INIT_SCALE * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(weights, temperature)
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        check_len(self.weights.len(), features.len())?;
        Ok(dot(&self.weights, features))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_temperature(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("temperature must be finite and > 0, got {tau}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Tabular(TabularPolicy),
    Linear(LinearPolicy),
}

impl From<TabularPolicy> for Policy {
    fn from(p: TabularPolicy) -> Self {
        Policy::Tabular(p)
    }
}

impl From<LinearPolicy> for Policy {
    fn from(p: LinearPolicy) -> Self {
        Policy::Linear(p)
    }
}

impl Policy {
    pub fn temperature(&self) -> f64 {
        match self {
            Policy::Tabular(p) => p.temperature,
            Policy::Linear(p) => p.temperature,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Policy::Tabular(p) => &p.logits,
            Policy::Linear(p) => &p.weights,
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Scores of every candidate of `prompt`, at the policy's temperature.
    pub fn scores(&self, world: &World, prompt: usize) -> Result<ScoreVector> {
        let scores = (0..world.candidates_per_prompt())
            .map(|c| self.score(world, prompt, c))
            .collect::<Result<Vec<_>>>()?;
        ScoreVector::new(scores, self.temperature())
    }

    /// Add `weight · ∂s(prompt, candidate)/∂θ` into `grads`.
    pub fn accumulate_score_grad(
        &self,
        world: &World,
        prompt: usize,
        candidate: usize,
        weight: f64,
        grads: &mut [f64],
    ) -> Result<()> {
        check_len(self.num_params(), grads.len())?;
        match self {
            Policy::Tabular(p) => grads[p.index(prompt, candidate)?] += weight,
            Policy::Linear(_) => {
                for (g, f) in grads.iter_mut().zip(world.features(prompt, candidate)?) {
                    *g += weight * f;
                }
            }
        }
        Ok(())
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Policy::Tabular(p) => &mut p.logits,
            Policy::Linear(p) => &mut p.weights,
        }
    }
}

impl Scorer for Policy {
    fn score(&self, world: &World, prompt: usize, candidate: usize) -> Result<f64> {
        world.check_ids(prompt, candidate)?;
        match self {
            Policy::Tabular(p) => p.score(prompt, candidate),
            Policy::Linear(p) => p.score(world.features(prompt, candidate)?),
        }
    }
}

/// Softmax of the policy's scores over a subset of a prompt's candidates.
pub fn candidate_distribution(
    policy: &Policy,
    world: &World,
    prompt: usize,
    candidates: &[usize],
) -> Result<DecisionDistribution> {
    if candidates.len() < 2 {
        return Err(invalid("need at least 2 candidates"));
    }
    let scores = candidates
        .iter()
        .map(|&c| policy.score(world, prompt, c))
        .collect::<Result<Vec<_>>>()?;
    softmax(&scores, policy.temperature())
}

/// Frozen copy of a policy, e.g. the DPO reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSnapshot {
    policy: Policy,
    step: usize,
}

impl ReferenceSnapshot {
    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn snapshot(&self) -> ReferenceSnapshot {
        self.clone()
    }
}

impl Scorer for ReferenceSnapshot {
    fn score(&self, world: &World, prompt: usize, candidate: usize) -> Result<f64> {
        self.policy.score(world, prompt, candidate)
    }
}

pub fn snapshot_reference(policy: &Policy, step: usize) -> ReferenceSnapshot {
    ReferenceSnapshot { policy: policy.clone(), step }
}

/// Scores candidates by the world's ground-truth reward.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrueRewardScorer;

impl Scorer for TrueRewardScorer {
    fn score(&self, world: &World, prompt: usize, candidate: usize) -> Result<f64> {
        world.true_reward(prompt, candidate)
    }
}

/// Plain gradient descent: `θ ← θ − lr · grads`.
pub fn apply_gradient(policy: &mut Policy, grads: &[f64], learning_rate: f64) -> Result<()> {
    check_len(policy.num_params(), grads.len())?;
    if !(learning_rate.is_finite() && learning_rate >= 0.0) {
        return Err(invalid(format!("learning rate must be finite and >= 0, got {learning_rate}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(invalid("non-finite gradient"));
    }
    for (theta, g) in policy.params_mut().iter_mut().zip(grads) {
        *theta -= learning_rate * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> World {
        // 2 prompts x 2 candidates x 2 features
        World::from_features(2, 2, vec![1.0, 1.0], vec![0.5, 0.25, 3.0, 0.0, -1.0, 2.0, 0.0, 0.0])
            .unwrap()
    }

    #[test]
    fn scores() {
        let w = world();
        let zero: Policy = TabularPolicy::zeros(2, 2, 1.0).unwrap().into();
        for p in 0..2 {
            for c in 0..2 {
                assert_eq!(zero.score(&w, p, c).unwrap(), 0.0);
            }
        }
        let basis: Policy = LinearPolicy::new(vec![1.0, 0.0], 1.0).unwrap().into();
        assert_eq!(basis.score(&w, 0, 1).unwrap(), 3.0);
        let lin = LinearPolicy::new(vec![1.0, 2.0], 1.0).unwrap();
        assert_eq!(lin.score(&[0.5, 0.25]).unwrap(), 1.0);
        assert!(lin.score(&[1.0]).is_err());
        assert!(zero.score(&w, 2, 0).is_err());
    }

    #[test]
    fn distributions() {
        let w = world();
        let zero: Policy = TabularPolicy::zeros(2, 2, 1.0).unwrap().into();
        assert_eq!(candidate_distribution(&zero, &w, 0, &[0, 1]).unwrap().probs(), &[0.5, 0.5]);

        let tab: Policy = TabularPolicy::from_logits(2, 2, vec![2f64.ln(), 0.0, 0.0, 0.0], 1.0)
            .unwrap()
            .into();
        let p = candidate_distribution(&tab, &w, 0, &[0, 1]).unwrap();
        assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-15);

        let hot: Policy = TabularPolicy::from_logits(2, 2, vec![1.0, -2.0, 0.0, 0.0], 1e6)
            .unwrap()
            .into();
        let p = candidate_distribution(&hot, &w, 0, &[0, 1]).unwrap();
        assert!(p.probs().iter().all(|x| (x - 0.5).abs() < 1e-5));
        assert!(candidate_distribution(&hot, &w, 0, &[0]).is_err());
    }

    #[test]
    fn snapshots_are_frozen() {
        let w = world();
        let mut policy: Policy = LinearPolicy::new(vec![0.3, -0.7], 1.0).unwrap().into();
        let snap = snapshot_reference(&policy, 0);
        let before = snap.score(&w, 1, 0).unwrap();
        assert_eq!(before, policy.score(&w, 1, 0).unwrap());
        apply_gradient(&mut policy, &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(snap.score(&w, 1, 0).unwrap().to_bits(), before.to_bits());
        assert_ne!(policy.score(&w, 1, 0).unwrap(), before);
        assert_eq!(snap.snapshot().score(&w, 1, 0).unwrap().to_bits(), before.to_bits());
    }

    #[test]
    fn gradient_steps() {
        let mut policy: Policy = TabularPolicy::from_logits(1, 2, vec![1.0, 3.0], 1.0).unwrap().into();
        let original = policy.clone();
        apply_gradient(&mut policy, &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(policy, original);
        apply_gradient(&mut policy, &[5.0, -1.0], 0.0).unwrap();
        assert_eq!(policy, original);
        apply_gradient(&mut policy, &[2.0, 0.0], 0.5).unwrap();
        assert_eq!(policy.params(), &[0.0, 3.0]);
        assert!(apply_gradient(&mut policy, &[1.0], 0.5).is_err());
        assert!(apply_gradient(&mut policy, &[1.0, 1.0], -0.5).is_err());
    }

    #[test]
    fn score_gradients() {
        let w = world();
        let lin: Policy = LinearPolicy::new(vec![0.0, 0.0], 1.0).unwrap().into();
        let mut g = vec![0.0; 2];
        lin.accumulate_score_grad(&w, 1, 0, 2.0, &mut g).unwrap();
        assert_eq!(g, vec![-2.0, 4.0]);
        let tab: Policy = TabularPolicy::zeros(2, 2, 1.0).unwrap().into();
        let mut g = vec![0.0; 4];
        tab.accumulate_score_grad(&w, 1, 1, -0.5, &mut g).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0, -0.5]);
    }

    #[test]
    fn random_linear_init_is_seeded() {
        let a = LinearPolicy::random(8, 1.0, 42).unwrap();
        assert_eq!(a, LinearPolicy::random(8, 1.0, 42).unwrap());
        assert_ne!(a, LinearPolicy::random(8, 1.0, 43).unwrap());
        assert!(a.weights().iter().all(|w| w.abs() < 1.0));
    }
}
