//! Losses and their analytic gradients.
//!
//! The distillation loss treats its target `q` as a constant: gradients
//! flow only through the policy distribution.

use crate::error::{check_len, invalid, Result};
use crate::simplex::{
    expected_reward, kl_divergence, softmax_distribution, DecisionDistribution,
    RewardVector, ScoreVector,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BETA: f64 = 0.1;

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Shannon entropy in nats.
pub fn entropy(q: &DecisionDistribution) -> f64 {
    -q.probs()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Cross-entropy `−Σ q_i ln p_i`. Infinite when `p` misses part of the
/// support of `q`.
pub fn ddorm_loss(q: &DecisionDistribution, p_theta: &DecisionDistribution) -> Result<f64> {
    check_len(q.len(), p_theta.len())?;
    let mut loss = 0.0;
    for (&qi, &pi) in q.probs().iter().zip(p_theta.probs()) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Ok(f64::INFINITY);
        }
        loss -= qi * pi.ln();
    }
    Ok(loss)
}

/// Gradient of `CE(q, softmax(s/τ))` with respect to the scores:
/// `(p_i − q_i) / τ`.
pub fn ddorm_loss_grad(q: &DecisionDistribution, s: &ScoreVector) -> Result<Vec<f64>> {
    check_len(q.len(), s.len())?;
    let p = softmax_distribution(s);
    let tau = s.temperature();
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(pi, qi)| (pi - qi) / tau)
        .collect())
}

/// Sequence-level log-probabilities of one preference pair under the
/// policy and the reference, plus the DPO inverse temperature β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub policy_logp_chosen: f64,
    pub policy_logp_rejected: f64,
    pub ref_logp_chosen: f64,
    pub ref_logp_rejected: f64,
    pub beta: f64,
}

impl DpoInputs {
    pub fn validate(&self) -> Result<()> {
        let logps = [
            self.policy_logp_chosen,
            self.policy_logp_rejected,
            self.ref_logp_chosen,
            self.ref_logp_rejected,
        ];
        if logps.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite DPO log-probability"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid(format!("beta must be finite and > 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// The reference-adjusted log-ratio difference, before scaling by β.
    pub fn bracket(&self) -> f64 {
        (self.policy_logp_chosen - self.policy_logp_rejected)
            - (self.ref_logp_chosen - self.ref_logp_rejected)
    }
}

/// `−ln σ(β · bracket)`, computed as `softplus(−β · bracket)`.
pub fn dpo_loss(inp: &DpoInputs) -> Result<f64> {
    inp.validate()?;
    Ok(softplus(-inp.beta * inp.bracket()))
}

/// Gradient of [`dpo_loss`] with respect to the policy log-probabilities of
/// the chosen and rejected responses. The two components always cancel.
pub fn dpo_loss_grad(inp: &DpoInputs) -> Result<(f64, f64)> {
    inp.validate()?;
    let weight = inp.beta * sigmoid(-inp.beta * inp.bracket());
    Ok((-weight, weight))
}

/// Value of the KL-regularized reward objective over a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlhfDiagnostic {
    pub expected_reward: f64,
    pub kl_to_ref: f64,
    pub lambda: f64,
    pub objective: f64,
}

/// `⟨p_θ, r⟩ − λ KL(p_θ‖p_ref)`. Evaluation only.
pub fn rlhf_diagnostic(
    p_theta: &DecisionDistribution,
    p_ref: &DecisionDistribution,
    r: &RewardVector,
    lambda: f64,
) -> Result<RlhfDiagnostic> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let expected_reward = expected_reward(p_theta, r)?;
    let kl_to_ref = kl_divergence(p_theta, p_ref)?;
    // λ = 0 must not turn an infinite KL into NaN.
    let objective = if lambda == 0.0 {
        expected_reward
    } else {
        expected_reward - lambda * kl_to_ref
    };
    Ok(RlhfDiagnostic { expected_reward, kl_to_ref, lambda, objective })
}
