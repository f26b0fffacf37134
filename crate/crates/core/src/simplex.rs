//! Distributions on the finite candidate simplex.
//!
//! Everything here is plain `f64` arithmetic on short vectors: temperature
//! softmax, KL divergence, policy-weighted reward centering, the Boltzmann
//! target `q ∝ exp((s + η r̃) / τ)`, and an iterative KL-proximal maximizer
//! used to certify that target independently of its closed form.

use crate::error::{check_len, invalid, Error, Result};

/// Tolerance on `Σ probs = 1` when a distribution is built from caller data.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Default step of the exponentiated-gradient oracle.
pub const ORACLE_STEP: f64 = 0.1;

/// Default iteration budget of the exponentiated-gradient oracle.
pub const ORACLE_MAX_ITERS: usize = 100_000;

/// Policy scores for the K candidates of one prompt, plus the softmax
/// temperature that turns them into a decision distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    temperature: f64,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, temperature: f64) -> Result<Self> {
        if scores.len() < 2 {
            return Err(invalid(format!("need at least 2 candidates, got {}", scores.len())));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("score {i} is not finite ({})", scores[i])));
        }
        check_temperature(temperature)?;
        Ok(Self { scores, temperature })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// A probability vector over K candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionDistribution {
    probs: Vec<f64>,
}

impl DecisionDistribution {
    /// Validates nonnegativity and `|Σ p − 1| ≤ 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(invalid(format!("need at least 2 candidates, got {}", probs.len())));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid(format!("probability {i} is invalid ({})", probs[i])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Reward-model scores for the K candidates of one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    rewards: Vec<f64>,
}

impl RewardVector {
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if rewards.is_empty() {
            return Err(invalid("empty reward vector"));
        }
        if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(invalid(format!("reward {i} is not finite ({})", rewards[i])));
        }
        Ok(Self { rewards })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// The same rewards plus a constant on every candidate.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.rewards.iter().map(|r| r + c).collect())
    }
}

/// Rewards minus their expectation under the policy that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredReward {
    pub baseline: f64,
    pub centered: Vec<f64>,
}

/// Step size η and temperature τ of one policy-improvement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdormStepParams {
    eta: f64,
    tau: f64,
}

impl DdormStepParams {
    /// `eta = 0` is accepted and yields the identity update.
    pub fn new(eta: f64, tau: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(invalid(format!("step size must be finite and >= 0, got {eta}")));
        }
        check_temperature(tau)?;
        Ok(Self { eta, tau })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

fn check_temperature(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("temperature must be finite and > 0, got {tau}")))
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Temperature softmax of raw logits with max-subtraction.
pub fn softmax(logits: &[f64], tau: f64) -> Result<DecisionDistribution> {
    check_temperature(tau)?;
    if logits.len() < 2 {
        return Err(invalid(format!("need at least 2 candidates, got {}", logits.len())));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite logit"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&x| ((x - max) / tau).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(DecisionDistribution { probs })
}

/// `p_i = exp(s_i/τ) / Σ_j exp(s_j/τ)`.
pub fn softmax_distribution(s: &ScoreVector) -> DecisionDistribution {
    softmax(&s.scores, s.temperature).expect("ScoreVector is validated on construction")
}

/// `KL(u‖p) = Σ u_i ln(u_i / p_i)` with `0 · ln 0 = 0`.
///
/// Returns `f64::INFINITY` when `u` puts mass where `p` has none. Tiny
/// negative values from rounding are clamped to zero.
pub fn kl_divergence(u: &DecisionDistribution, p: &DecisionDistribution) -> Result<f64> {
    check_len(u.len(), p.len())?;
    Ok(kl_raw(u.probs(), p.probs()))
}

pub(crate) fn kl_raw(u: &[f64], p: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&ui, &pi) in u.iter().zip(p) {
        if ui == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return f64::INFINITY;
        }
        total += ui * (ui / pi).ln();
    }
    total.max(0.0)
}

/// `r̄ = Σ p_i r_i` and `r̃_i = r_i − r̄`.
pub fn center_rewards(p: &DecisionDistribution, r: &RewardVector) -> Result<CenteredReward> {
    check_len(p.len(), r.len())?;
    let baseline: f64 = p.probs().iter().zip(r.rewards()).map(|(pi, ri)| pi * ri).sum();
    let centered = r.rewards().iter().map(|ri| ri - baseline).collect();
    Ok(CenteredReward { baseline, centered })
}

/// `⟨u, r⟩`.
pub fn expected_reward(u: &DecisionDistribution, r: &RewardVector) -> Result<f64> {
    check_len(u.len(), r.len())?;
    Ok(dot(u.probs(), r.rewards()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_step_inputs(s: &ScoreVector, r: &RewardVector, params: &DdormStepParams) -> Result<()> {
    check_len(s.len(), r.len())?;
    if s.temperature() != params.tau() {
        return Err(invalid(format!(
            "score temperature {} differs from step temperature {}",
            s.temperature(),
            params.tau()
        )));
    }
    Ok(())
}

/// The improved score vector `s'_i = s_i + η r̃_i`, with `r̃` centered under
/// the current `softmax(s/τ)`. Unlike the target distribution, `s'` itself
/// depends on the reward offset only through the centering.
pub fn ddorm_updated_scores(
    s: &ScoreVector,
    r: &RewardVector,
    params: &DdormStepParams,
) -> Result<Vec<f64>> {
    check_step_inputs(s, r, params)?;
    let p = softmax_distribution(s);
    let centered = center_rewards(&p, r)?.centered;
    Ok(s.scores()
        .iter()
        .zip(&centered)
        .map(|(si, ri)| si + params.eta() * ri)
        .collect())
}

/// The reward-guided target `q = softmax((s + η r̃) / τ)`.
pub fn ddorm_target(
    s: &ScoreVector,
    r: &RewardVector,
    params: &DdormStepParams,
) -> Result<DecisionDistribution> {
    let updated = ddorm_updated_scores(s, r, params)?;
    softmax(&updated, params.tau())
}

/// `⟨u, r⟩ − (τ/η) KL(u‖p)`, the objective maximized by the target.
/// Requires `η > 0`.
pub fn kl_prox_objective(
    u: &[f64],
    p: &DecisionDistribution,
    r: &RewardVector,
    params: &DdormStepParams,
) -> Result<f64> {
    check_len(p.len(), u.len())?;
    check_len(p.len(), r.len())?;
    if params.eta() <= 0.0 {
        return Err(invalid("KL-prox objective needs eta > 0"));
    }
    let penalty = params.tau() / params.eta();
    Ok(dot(u, r.rewards()) - penalty * kl_raw(u, p.probs()))
}

/// Numerical maximizer of [`kl_prox_objective`] by exponentiated-gradient
/// ascent, started at `p`.
///
/// Stops when the spread `max_i g_i − min_i g_i` of the objective gradient
/// over the support of `p` falls below `tol` (at the optimum all gradient
/// entries are equal). Does not use [`ddorm_target`].
pub fn kl_prox_oracle(
    p: &DecisionDistribution,
    r: &RewardVector,
    params: &DdormStepParams,
    tol: f64,
) -> Result<DecisionDistribution> {
    kl_prox_oracle_from(p, r, params, tol, p.probs(), ORACLE_MAX_ITERS)
}

/// [`kl_prox_oracle`] started from an arbitrary point of the simplex.
/// Zero entries of `init` inside the support of `p` are lifted to a tiny
/// positive mass so that multiplicative updates can move them.
pub fn kl_prox_oracle_from(
    p: &DecisionDistribution,
    r: &RewardVector,
    params: &DdormStepParams,
    tol: f64,
    init: &[f64],
    max_iters: usize,
) -> Result<DecisionDistribution> {
    let k = p.len();
    check_len(k, r.len())?;
    check_len(k, init.len())?;
    if params.eta() <= 0.0 {
        return Err(invalid("KL-prox oracle needs eta > 0"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let penalty = params.tau() / params.eta();
    // The log-iterate recurrence contracts by (1 − step·penalty); keep that
    // factor in [0.5, 1) so stiff problems neither oscillate nor diverge.
    let step = ORACLE_STEP.min(0.5 / penalty);

    let support: Vec<usize> = (0..k).filter(|&i| p.probs()[i] > 0.0).collect();
    let log_p: Vec<f64> = p.probs().iter().map(|x| x.ln()).collect();
    let mut log_u: Vec<f64> = init.iter().map(|&x| x.max(1e-300).ln()).collect();

    let gradient = |log_u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(
            support
                .iter()
                .map(|&i| r.rewards()[i] - penalty * (log_u[i] - log_p[i])),
        );
    };

    let mut grad = Vec::with_capacity(support.len());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        gradient(&log_u, &mut grad);
        let (lo, hi) = grad
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
        residual = hi - lo;
        if residual <= tol {
            return Ok(normalize_log_weights(&log_u, &support, k));
        }
        for (&i, g) in support.iter().zip(&grad) {
            log_u[i] += step * g;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
        last_iterate: normalize_log_weights(&log_u, &support, k).into_vec(),
    })
}

fn normalize_log_weights(log_u: &[f64], support: &[usize], k: usize) -> DecisionDistribution {
    let max = support
        .iter()
        .map(|&i| log_u[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; k];
    for &i in support {
        probs[i] = (log_u[i] - max).exp();
    }
    let total: f64 = probs.iter().sum();
    for x in &mut probs {
        *x /= total;
    }
    DecisionDistribution { probs }
}

/// Brute-force maximizer of [`kl_prox_objective`] over a regular grid on the
/// simplex, for K ∈ {2, 3}. Returns the best grid point and its objective.
pub fn kl_prox_grid(
    p: &DecisionDistribution,
    r: &RewardVector,
    params: &DdormStepParams,
    grid_step: f64,
) -> Result<(Vec<f64>, f64)> {
    let k = p.len();
    if !(2..=3).contains(&k) {
        return Err(invalid(format!("grid search supports K = 2 or 3, got {k}")));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(invalid(format!("grid step must be in (0, 0.5], got {grid_step}")));
    }
    let n = (1.0 / grid_step).round() as usize;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut consider = |u: Vec<f64>| -> Result<()> {
        let value = kl_prox_objective(&u, p, r, params)?;
        if value > best.1 {
            best = (u, value);
        }
        Ok(())
    };
    for i in 0..=n {
        let a = i as f64 / n as f64;
        if k == 2 {
            consider(vec![a, 1.0 - a])?;
        } else {
            for j in 0..=(n - i) {
                let b = j as f64 / n as f64;
                consider(vec![a, b, (1.0 - a - b).max(0.0)])?;
            }
        }
    }
    Ok(best)
}
