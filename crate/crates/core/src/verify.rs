//! Randomized property suite.
//!
//! Each check draws its cases from a fixed-seed generator, runs a library
//! routine against an independent route (closed form vs. iterative
//! maximizer, analytic vs. finite-difference gradient, sorted vs.
//! enumerated AUC, ...) and reports how many cases it ran and the worst
//! deviation it saw.

use crate::error::Result;
use crate::metrics::{evaluate, mean_margin, pair_accuracy, roc_auc, ScoredPair};
use crate::objectives::{
    ddorm_loss, ddorm_loss_grad, dpo_loss, dpo_loss_grad, entropy, sigmoid, DpoInputs,
};
use crate::oracle::{brute_force_auc, central_difference, gradient_error_ratio, FD_STEP};
use crate::policy::{
    apply_gradient, candidate_distribution, LinearPolicy, Policy, TabularPolicy, TrueRewardScorer,
};
use crate::simplex::{
    ddorm_target, ddorm_updated_scores, expected_reward, kl_divergence, kl_prox_grid,
    kl_prox_objective, kl_prox_oracle, softmax, softmax_distribution, DdormStepParams,
    DecisionDistribution, RewardVector, ScoreVector,
};
use crate::trainer::{ddorm_step, train, Method, TrainConfig, TrainData};
use crate::world::{
    generate_world, partition_prompts, rm_score, rm_scores, sample_preferences, Distortion,
    PreferenceExample, RewardModelSim, World, WorldSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_SEED: u64 = 0x00dd_0a11;

pub const TARGET_CASES: usize = 500;
pub const TARGET_ENTRY_TOL: f64 = 1e-5;
pub const TARGET_OBJECTIVE_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-11;
pub const SHIFT_CASES: usize = 1_000;
pub const SHIFT_TARGET_TOL: f64 = 1e-12;
pub const SHIFT_SCORE_TOL: f64 = 1e-9;
pub const IMPROVEMENT_CASES: usize = 10_000;
pub const IMPROVEMENT_SLACK: f64 = 1e-12;
pub const GRAD_CASES: usize = 1_000;
pub const AUC_CASES: usize = 500;
pub const BT_DRAWS: usize = 10_000;

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Build the improved scores from raw rewards instead of centered ones.
    CenteringOff,
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "centering-off" => Ok(Fault::CenteringOff),
            other => Err(format!("unknown fault {other:?} (known: centering-off)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub cases: usize,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<15} {:<33} {:>6} cases  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.cases,
            self.detail
        )
    }
}

/// Accumulates the worst value of a per-case statistic against a bound.
struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
    label: &'static str,
    bound: f64,
}

impl Tally {
    fn new(label: &'static str, bound: f64) -> Self {
        Self { cases: 0, failures: 0, worst: 0.0, label, bound }
    }

    /// Record one case whose statistic must not exceed the bound.
    fn at_most(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.bound {
            self.failures += 1;
        }
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn flag(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
    }

    fn passed(&self) -> bool {
        self.failures == 0
    }

    fn describe(&self) -> String {
        format!(
            "{} {:.3e} (bound {:.0e}), {} failing",
            self.label, self.worst, self.bound, self.failures
        )
    }
}

type CheckFn = fn(&mut ChaCha8Rng, &VerifyOptions) -> Result<(usize, bool, String)>;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("simplex_core", "target_oracle_equivalence", target_oracle_equivalence),
    ("simplex_core", "target_grid_cross_check", target_grid_cross_check),
    ("simplex_core", "shift_invariance", shift_invariance),
    ("simplex_core", "zero_step_identity", zero_step_identity),
    ("simplex_core", "improvement", improvement),
    ("simplex_core", "monotone_concentration", monotone_concentration),
    ("simplex_core", "gibbs_identity", gibbs_identity),
    ("simplex_core", "kl_nonnegativity", kl_nonnegativity),
    ("objectives", "ddorm_grad_finite_difference", ddorm_grad_fd),
    ("objectives", "dpo_grad_finite_difference", dpo_grad_fd),
    ("objectives", "dpo_loss_at_reference", dpo_loss_at_reference),
    ("objectives", "cross_entropy_decomposition", cross_entropy_decomposition),
    ("objectives", "dpo_shift_invariance", dpo_shift_invariance),
    ("objectives", "cross_entropy_minimized_at_target", ce_minimized_at_target),
    ("policy_models", "distillation_convergence", distillation_convergence),
    ("policy_models", "candidate_distribution_shift", candidate_distribution_shift),
    ("synthetic_world", "world_determinism", world_determinism),
    ("synthetic_world", "monotone_rank_preservation", rank_preservation),
    ("synthetic_world", "biased_rm_shift_robustness", biased_rm_shift),
    ("synthetic_world", "bradley_terry_calibration", bradley_terry_calibration),
    ("trainer", "train_determinism", train_determinism),
    ("trainer", "per_step_improvement", per_step_improvement),
    ("trainer", "dpo_loss_nonincreasing", dpo_nonincreasing),
    ("trainer", "constant_rewards_fixed_point", constant_rewards_fixed_point),
    ("metrics", "auc_brute_force", auc_brute_force),
    ("metrics", "monotone_transform_invariance", monotone_transform_invariance),
    ("metrics", "evaluate_purity", evaluate_purity),
];

/// Names of every check in suite order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(_, name, _)| *name).collect()
}

pub fn run_suite(options: &VerifyOptions) -> Vec<CheckOutcome> {
    run_suite_filtered(options, |_| true)
}

pub fn run_check(name: &str, options: &VerifyOptions) -> Option<CheckOutcome> {
    run_suite_filtered(options, |n| n == name).pop()
}

fn run_suite_filtered(options: &VerifyOptions, keep: impl Fn(&str) -> bool) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .filter(|(_, (_, name, _))| keep(name))
        .map(|(i, &(module, name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(i as u64);
            match check(&mut rng, options) {
                Ok((cases, passed, detail)) => CheckOutcome { module, name, cases, passed, detail },
                Err(e) => CheckOutcome {
                    module,
                    name,
                    cases: 0,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// random instances

const K_CHOICES: [usize; 4] = [2, 3, 5, 10];

struct Instance {
    scores: ScoreVector,
    rewards: RewardVector,
    params: DdormStepParams,
}

fn uniform_vec(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> Result<Instance> {
    let tau = rng.random_range(0.1..5.0);
    let eta = rng.random_range(0.01..10.0);
    Ok(Instance {
        scores: ScoreVector::new(uniform_vec(rng, k, -3.0, 3.0), tau)?,
        rewards: RewardVector::new(uniform_vec(rng, k, -5.0, 5.0))?,
        params: DdormStepParams::new(eta, tau)?,
    })
}

fn random_k(rng: &mut ChaCha8Rng) -> usize {
    K_CHOICES[rng.random_range(0..K_CHOICES.len())]
}

fn any_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let k = random_k(rng);
    random_instance(rng, k)
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Result<DecisionDistribution> {
    softmax(&uniform_vec(rng, k, -3.0, 3.0), 1.0)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn small_world(rng: &mut ChaCha8Rng, num_prompts: usize, k: usize, dim: usize) -> Result<World> {
    generate_world(&WorldSpec {
        num_prompts,
        candidates_per_prompt: k,
        feature_dim: dim,
        true_reward_weights: uniform_vec(rng, dim, -1.0, 1.0),
        seed: rng.random(),
    })
}

// ---------------------------------------------------------------------------
// simplex_core

fn target_oracle_equivalence(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut entries = Tally::new("max entry gap", TARGET_ENTRY_TOL);
    let mut objective = Tally::new("max objective gap", TARGET_OBJECTIVE_TOL);
    for _ in 0..TARGET_CASES {
        let inst = any_instance(rng)?;
        let p = softmax_distribution(&inst.scores);
        let q = ddorm_target(&inst.scores, &inst.rewards, &inst.params)?;
        let u = kl_prox_oracle(&p, &inst.rewards, &inst.params, ORACLE_TOL)?;
        entries.at_most(max_abs_diff(q.probs(), u.probs()));
        let fq = kl_prox_objective(q.probs(), &p, &inst.rewards, &inst.params)?;
        let fu = kl_prox_objective(u.probs(), &p, &inst.rewards, &inst.params)?;
        objective.at_most((fq - fu).abs());
    }
    Ok((
        entries.cases,
        entries.passed() && objective.passed(),
        format!("{}; {}", entries.describe(), objective.describe()),
    ))
}

fn target_grid_cross_check(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    // No grid point may beat the iterative maximizer.
    let mut excess = Tally::new("max grid excess", 1e-10);
    for case in 0..12 {
        let k = if case % 2 == 0 { 2 } else { 3 };
        let inst = random_instance(rng, k)?;
        let p = softmax_distribution(&inst.scores);
        let u = kl_prox_oracle(&p, &inst.rewards, &inst.params, ORACLE_TOL)?;
        let fu = kl_prox_objective(u.probs(), &p, &inst.rewards, &inst.params)?;
        let (_, grid_best) = kl_prox_grid(&p, &inst.rewards, &inst.params, 1e-3)?;
        excess.at_most((grid_best - fu).max(0.0));
    }
    Ok((excess.cases, excess.passed(), excess.describe()))
}

fn shift_invariance(rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(usize, bool, String)> {
    let improved = |inst: &Instance, r: &RewardVector| -> Result<(Vec<f64>, DecisionDistribution)> {
        let scores = match opts.fault {
            None => ddorm_updated_scores(&inst.scores, r, &inst.params)?,
            Some(Fault::CenteringOff) => inst
                .scores
                .scores()
                .iter()
                .zip(r.rewards())
                .map(|(s, ri)| s + inst.params.eta() * ri)
                .collect(),
        };
        let q = softmax(&scores, inst.params.tau())?;
        Ok((scores, q))
    };
    let mut targets = Tally::new("max target gap", SHIFT_TARGET_TOL);
    let mut scores = Tally::new("max improved-score gap", SHIFT_SCORE_TOL);
    for _ in 0..SHIFT_CASES {
        let inst = any_instance(rng)?;
        let c = rng.random_range(-100.0..100.0);
        let (s0, q0) = improved(&inst, &inst.rewards)?;
        let (s1, q1) = improved(&inst, &inst.rewards.shifted(c)?)?;
        targets.at_most(max_abs_diff(q0.probs(), q1.probs()));
        scores.at_most(max_abs_diff(&s0, &s1));
    }
    Ok((
        targets.cases,
        targets.passed() && scores.passed(),
        format!("{}; {}", targets.describe(), scores.describe()),
    ))
}

fn zero_step_identity(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut identical = Tally::new("bitwise mismatches", 0.0);
    for _ in 0..500 {
        let inst = any_instance(rng)?;
        let params = DdormStepParams::new(0.0, inst.params.tau())?;
        let q = ddorm_target(&inst.scores, &inst.rewards, &params)?;
        let p = softmax_distribution(&inst.scores);
        let same = q.probs().iter().zip(p.probs()).all(|(a, b)| a.to_bits() == b.to_bits());
        identical.at_most(if same { 0.0 } else { 1.0 });
    }
    let mut grads = Tally::new("max |grad|", 1e-12);
    let world = small_world(rng, 20, 4, 3)?;
    let rm = RewardModelSim { noise_std: 0.5, seed: 3, ..RewardModelSim::exact() };
    let policy: Policy = LinearPolicy::random(3, 0.7, rng.random())?.into();
    let params = DdormStepParams::new(0.0, 0.7)?;
    for prompt in 0..world.num_prompts() {
        let out = ddorm_step(&policy, &world, &rm, prompt, &params)?;
        grads.at_most(out.grads.iter().fold(0.0, |m, g| m.max(g.abs())));
    }
    Ok((
        identical.cases + grads.cases,
        identical.passed() && grads.passed(),
        format!("{}; {}", identical.describe(), grads.describe()),
    ))
}

fn improvement(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut deficit = Tally::new("max deficit", IMPROVEMENT_SLACK);
    for _ in 0..IMPROVEMENT_CASES {
        let mut inst = any_instance(rng)?;
        // Include small steps, where the gain is tiny.
        if rng.random_bool(0.2) {
            inst.params = DdormStepParams::new(rng.random_range(0.0..1e-3), inst.params.tau())?;
        }
        let p = softmax_distribution(&inst.scores);
        let q = ddorm_target(&inst.scores, &inst.rewards, &inst.params)?;
        let gain = expected_reward(&q, &inst.rewards)? - expected_reward(&p, &inst.rewards)?;
        deficit.at_most(-gain);
    }
    Ok((deficit.cases, deficit.passed(), deficit.describe()))
}

fn monotone_concentration(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let etas: Vec<f64> = (0..=16).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect();
    let mut drop = Tally::new("max expected-reward drop", 1e-12);
    let mut missing = Tally::new("max mass off argmax at eta=1e4", 1e-6);
    for _ in 0..300 {
        let k = random_k(rng);
        let tau = rng.random_range(0.1..5.0);
        let scores = ScoreVector::new(uniform_vec(rng, k, -3.0, 3.0), tau)?;
        let rewards = loop {
            let r = uniform_vec(rng, k, -5.0, 5.0);
            let mut sorted = r.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted[0] - sorted[1] >= 0.05 {
                break RewardVector::new(r)?;
            }
        };
        let best = crate::simplex::argmax(rewards.rewards());
        let mut previous = f64::NEG_INFINITY;
        for &eta in &etas {
            let q = ddorm_target(&scores, &rewards, &DdormStepParams::new(eta, tau)?)?;
            let value = expected_reward(&q, &rewards)?;
            drop.at_most((previous - value).max(0.0));
            previous = value;
        }
        let q = ddorm_target(&scores, &rewards, &DdormStepParams::new(1e4, tau)?)?;
        missing.at_most(1.0 - q.probs()[best]);
    }
    Ok((
        missing.cases,
        drop.passed() && missing.passed(),
        format!("{}; {}", drop.describe(), missing.describe()),
    ))
}

fn gibbs_identity(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max entry gap", 1e-12);
    for _ in 0..1_000 {
        let inst = any_instance(rng)?;
        let p = softmax_distribution(&inst.scores);
        let q = ddorm_target(&inst.scores, &inst.rewards, &inst.params)?;
        let exponents: Vec<f64> = inst
            .rewards
            .rewards()
            .iter()
            .map(|r| inst.params.eta() * r / inst.params.tau())
            .collect();
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> =
            p.probs().iter().zip(&exponents).map(|(pi, e)| pi * (e - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let gibbs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        gap.at_most(max_abs_diff(q.probs(), &gibbs));
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

fn kl_nonnegativity(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut negative = Tally::new("most negative KL", 0.0);
    let mut self_kl = Tally::new("max KL(p||p)", 1e-14);
    for _ in 0..1_000 {
        let k = random_k(rng);
        let u = random_distribution(rng, k)?;
        let p = random_distribution(rng, k)?;
        negative.at_most(-kl_divergence(&u, &p)?);
        self_kl.at_most(kl_divergence(&p, &p)?.abs());
    }
    Ok((
        negative.cases,
        negative.passed() && self_kl.passed(),
        format!("{}; {}", negative.describe(), self_kl.describe()),
    ))
}

// ---------------------------------------------------------------------------
// objectives

fn ddorm_grad_fd(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut ratio = Tally::new("max error/allowed", 1.0);
    for _ in 0..GRAD_CASES {
        let k = rng.random_range(2..=10);
        let tau = rng.random_range(0.5..2.0);
        let s = ScoreVector::new(uniform_vec(rng, k, -3.0, 3.0), tau)?;
        let q = random_distribution(rng, k)?;
        let analytic = ddorm_loss_grad(&q, &s)?;
        let loss = |x: &[f64]| {
            let p = softmax(x, tau).expect("finite probe");
            ddorm_loss(&q, &p).expect("same length")
        };
        let numeric = central_difference(loss, s.scores(), FD_STEP);
        ratio.at_most(gradient_error_ratio(&analytic, &numeric));
    }
    Ok((ratio.cases, ratio.passed(), ratio.describe()))
}

fn random_dpo(rng: &mut ChaCha8Rng) -> DpoInputs {
    DpoInputs {
        policy_logp_chosen: rng.random_range(-20.0..0.0),
        policy_logp_rejected: rng.random_range(-20.0..0.0),
        ref_logp_chosen: rng.random_range(-20.0..0.0),
        ref_logp_rejected: rng.random_range(-20.0..0.0),
        beta: rng.random_range(0.01..1.0),
    }
}

fn dpo_grad_fd(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut ratio = Tally::new("max error/allowed", 1.0);
    let mut antisymmetry = Tally::new("max |g+ + g-|", 0.0);
    for _ in 0..GRAD_CASES {
        let inp = random_dpo(rng);
        let (gc, gr) = dpo_loss_grad(&inp)?;
        let loss = |x: &[f64]| {
            let probe = DpoInputs { policy_logp_chosen: x[0], policy_logp_rejected: x[1], ..inp };
            dpo_loss(&probe).expect("finite probe")
        };
        let numeric =
            central_difference(loss, &[inp.policy_logp_chosen, inp.policy_logp_rejected], FD_STEP);
        ratio.at_most(gradient_error_ratio(&[gc, gr], &numeric));
        antisymmetry.at_most((gc + gr).abs());
    }
    Ok((
        ratio.cases,
        ratio.passed() && antisymmetry.passed(),
        format!("{}; {}", ratio.describe(), antisymmetry.describe()),
    ))
}

fn dpo_loss_at_reference(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max |loss - ln 2|", 1e-12);
    for _ in 0..GRAD_CASES {
        let inp = random_dpo(rng);
        let at_ref = DpoInputs {
            ref_logp_chosen: inp.policy_logp_chosen,
            ref_logp_rejected: inp.policy_logp_rejected,
            ..inp
        };
        gap.at_most((dpo_loss(&at_ref)? - std::f64::consts::LN_2).abs());
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

fn cross_entropy_decomposition(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max |CE - H - KL|", 1e-10);
    for _ in 0..1_000 {
        let k = random_k(rng);
        let q = random_distribution(rng, k)?;
        let p = random_distribution(rng, k)?;
        gap.at_most((ddorm_loss(&q, &p)? - entropy(&q) - kl_divergence(&q, &p)?).abs());
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

fn dpo_shift_invariance(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max loss change", 1e-12);
    for _ in 0..1_000 {
        let inp = random_dpo(rng);
        let c = rng.random_range(-50.0..50.0);
        let shifted = DpoInputs {
            policy_logp_chosen: inp.policy_logp_chosen + c,
            policy_logp_rejected: inp.policy_logp_rejected + c,
            ..inp
        };
        gap.at_most((dpo_loss(&inp)? - dpo_loss(&shifted)?).abs());
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

fn ce_minimized_at_target(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut excess = Tally::new("max CE(q,q) - CE(q,p')", 1e-12);
    for _ in 0..1_000 {
        let k = random_k(rng);
        let tau = rng.random_range(0.1..5.0);
        let s = uniform_vec(rng, k, -3.0, 3.0);
        let q = softmax(&s, tau)?;
        let perturbed: Vec<f64> = s.iter().map(|x| x + rng.random_range(-1.0..1.0)).collect();
        let p = softmax(&perturbed, tau)?;
        excess.at_most(ddorm_loss(&q, &q)? - ddorm_loss(&q, &p)?);
    }
    Ok((excess.cases, excess.passed(), excess.describe()))
}

// ---------------------------------------------------------------------------
// policy_models

fn distillation_convergence(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut kl = Tally::new("max final KL(q||p)", 1e-6);
    for _ in 0..25 {
        let first = rng.random_range(0.01..0.99);
        let q = DecisionDistribution::new(vec![first, 1.0 - first])?;
        let mut policy: Policy = TabularPolicy::zeros(1, 2, 1.0)?.into();
        for _ in 0..10_000 {
            let s = ScoreVector::new(policy.params().to_vec(), 1.0)?;
            let grads = ddorm_loss_grad(&q, &s)?;
            apply_gradient(&mut policy, &grads, 0.5)?;
        }
        let p = softmax(policy.params(), 1.0)?;
        kl.at_most(kl_divergence(&q, &p)?);
    }
    Ok((kl.cases, kl.passed(), kl.describe()))
}

fn candidate_distribution_shift(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max entry gap", 1e-12);
    for _ in 0..500 {
        let k = random_k(rng);
        let world = World::from_features(1, k, vec![1.0], vec![0.0; k])?;
        let tau = rng.random_range(0.1..5.0);
        let logits = uniform_vec(rng, k, -3.0, 3.0);
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = logits.iter().map(|x| x + c).collect();
        let all: Vec<usize> = (0..k).collect();
        let a: Policy = TabularPolicy::from_logits(1, k, logits, tau)?.into();
        let b: Policy = TabularPolicy::from_logits(1, k, shifted, tau)?.into();
        let pa = candidate_distribution(&a, &world, 0, &all)?;
        let pb = candidate_distribution(&b, &world, 0, &all)?;
        gap.at_most(max_abs_diff(pa.probs(), pb.probs()));
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

// ---------------------------------------------------------------------------
// synthetic_world

fn world_determinism(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut same = Tally::new("mismatches", 0.0);
    for _ in 0..20 {
        let spec = WorldSpec {
            num_prompts: rng.random_range(2..30),
            candidates_per_prompt: rng.random_range(2..6),
            feature_dim: rng.random_range(1..6),
            true_reward_weights: Vec::new(),
            seed: rng.random(),
        };
        let spec = WorldSpec { true_reward_weights: uniform_vec(rng, spec.feature_dim, -1.0, 1.0), ..spec };
        let a = generate_world(&spec)?;
        let b = generate_world(&spec)?;
        let sim = RewardModelSim { noise_std: 1.0, seed: rng.random(), ..RewardModelSim::exact() };
        let split_seed = rng.random();
        let prompts: Vec<usize> = (0..a.num_prompts()).collect();
        let mut ok = a == b
            && sample_preferences(&a, 100, split_seed, &prompts)?
                == sample_preferences(&b, 100, split_seed, &prompts)?
            && partition_prompts(&a, 0.3, split_seed)? == partition_prompts(&b, 0.3, split_seed)?;
        for p in 0..a.num_prompts() {
            for c in 0..a.candidates_per_prompt() {
                ok &= rm_score(&sim, &a, p, c)?.to_bits() == rm_score(&sim, &b, p, c)?.to_bits();
            }
        }
        same.at_most(if ok { 0.0 } else { 1.0 });
    }
    Ok((same.cases, same.passed(), same.describe()))
}

fn argsort(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    idx
}

fn rank_preservation(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut tally = Tally::new("reordered prompts", 0.0);
    let world = small_world(rng, 50, 5, 4)?;
    for distortion in [Distortion::Identity, Distortion::Cube, Distortion::SignedSqrt] {
        for scale in [0.5, 1.0, 2.0, 3.0] {
            for bias in [-10.0, 0.0, 10.0] {
                let sim = RewardModelSim { scale, bias, distortion, ..RewardModelSim::exact() };
                let reordered = (0..world.num_prompts())
                    .filter(|&p| {
                        let rm = rm_scores(&sim, &world, p).expect("valid prompt");
                        argsort(rm.rewards()) != argsort(world.true_rewards(p).expect("valid prompt"))
                    })
                    .count();
                tally.at_most(reordered as f64);
            }
        }
    }
    Ok((tally.cases, tally.passed(), tally.describe()))
}

fn biased_rm_shift(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut gap = Tally::new("max target gap", 1e-12);
    let world = small_world(rng, 40, 4, 3)?;
    for prompt in 0..world.num_prompts() {
        let tau = rng.random_range(0.1..5.0);
        let params = DdormStepParams::new(rng.random_range(0.01..10.0), tau)?;
        let scores = ScoreVector::new(uniform_vec(rng, 4, -3.0, 3.0), tau)?;
        let scale = rng.random_range(0.5..2.0);
        let noise_std = if prompt % 2 == 0 { 0.0 } else { 0.7 };
        let base = RewardModelSim { scale, noise_std, seed: 11, ..RewardModelSim::exact() };
        let q0 = ddorm_target(&scores, &rm_scores(&base, &world, prompt)?, &params)?;
        for bias in [-10.0, -1.0, 3.5, 10.0] {
            let sim = RewardModelSim { bias, ..base };
            let q = ddorm_target(&scores, &rm_scores(&sim, &world, prompt)?, &params)?;
            gap.at_most(max_abs_diff(q0.probs(), q.probs()));
        }
    }
    Ok((gap.cases, gap.passed(), gap.describe()))
}

/// Fraction of draws in which candidate 0 of a two-candidate prompt with
/// the given true rewards is labelled chosen.
pub fn bradley_terry_chosen_rate(r_first: f64, r_second: f64, draws: usize, seed: u64) -> Result<f64> {
    let world = World::from_features(1, 2, vec![1.0], vec![r_first, r_second])?;
    let prefs = sample_preferences(&world, draws, seed, &[0])?;
    Ok(prefs.iter().filter(|e| e.chosen_id == 0).count() as f64 / draws as f64)
}

fn bradley_terry_calibration(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let seed = rng.random();
    let gap2 = bradley_terry_chosen_rate(2.0, 0.0, BT_DRAWS, seed)?;
    let even = bradley_terry_chosen_rate(0.0, 0.0, BT_DRAWS, seed)?;
    let saturated = bradley_terry_chosen_rate(50.0, 0.0, BT_DRAWS, seed)?;
    let ok = (gap2 - sigmoid(2.0)).abs() <= 0.01 && (even - 0.5).abs() <= 0.02 && saturated == 1.0;
    Ok((
        3 * BT_DRAWS,
        ok,
        format!(
            "gap 2: {gap2:.4} vs {:.4}; equal: {even:.4}; gap 50: {saturated:.4}",
            sigmoid(2.0)
        ),
    ))
}

// ---------------------------------------------------------------------------
// trainer

fn small_training_setup(rng: &mut ChaCha8Rng) -> Result<(World, Vec<PreferenceExample>, Policy)> {
    let world = small_world(rng, 12, 3, 4)?;
    let prompts: Vec<usize> = (0..world.num_prompts()).collect();
    let examples = sample_preferences(&world, 64, rng.random(), &prompts)?;
    let policy = LinearPolicy::random(4, 1.0, rng.random())?.into();
    Ok((world, examples, policy))
}

fn small_config(method: Method, seed: u64) -> TrainConfig {
    TrainConfig {
        method,
        eta: 2.0,
        tau: 1.0,
        beta: 0.1,
        learning_rate: 0.1,
        steps: 60,
        batch_size: 4,
        seed,
    }
}

fn train_determinism(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let (world, examples, policy) = small_training_setup(rng)?;
    let rm = RewardModelSim { noise_std: 0.3, seed: 5, ..RewardModelSim::exact() };
    let prompts: Vec<usize> = (0..world.num_prompts()).collect();
    let seed = rng.random();
    let mut mismatches = 0;
    for method in [Method::Ddorm, Method::Dpo] {
        let data = match method {
            Method::Ddorm => TrainData::Ddorm { rm: &rm, prompts: &prompts },
            Method::Dpo => TrainData::Dpo { examples: &examples },
        };
        let a = train(&small_config(method, seed), &world, data, policy.clone())?;
        let b = train(&small_config(method, seed), &world, data, policy.clone())?;
        if a != b {
            mismatches += 1;
        }
    }
    Ok((2, mismatches == 0, format!("{mismatches} of 2 methods differ between runs")))
}

fn per_step_improvement(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let (world, _, policy) = small_training_setup(rng)?;
    let rm = RewardModelSim { noise_std: 0.5, bias: 4.0, seed: 9, ..RewardModelSim::exact() };
    let prompts: Vec<usize> = (0..world.num_prompts()).collect();
    let mut deficit = Tally::new("max deficit", IMPROVEMENT_SLACK);
    let config = TrainConfig { steps: 300, ..small_config(Method::Ddorm, rng.random()) };
    let (_, log) = train(&config, &world, TrainData::Ddorm { rm: &rm, prompts: &prompts }, policy)?;
    for record in &log.records {
        deficit.at_most(-record.min_improvement.unwrap_or(f64::NAN));
    }
    Ok((deficit.cases, deficit.passed(), deficit.describe()))
}

fn dpo_nonincreasing(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut rise = Tally::new("max per-step loss increase", 0.0);
    for _ in 0..10 {
        let world = small_world(rng, 1, 2, 3)?;
        let example = PreferenceExample::new(&world, 0, 0, 1)?;
        let policy: Policy = TabularPolicy::zeros(1, 2, 1.0)?.into();
        let config = TrainConfig {
            learning_rate: rng.random_range(0.001..0.01),
            steps: 200,
            batch_size: 1,
            ..small_config(Method::Dpo, rng.random())
        };
        let (_, log) = train(&config, &world, TrainData::Dpo { examples: &[example] }, policy)?;
        for pair in log.records.windows(2) {
            rise.at_most((pair[1].mean_loss - pair[0].mean_loss).max(0.0));
        }
    }
    Ok((rise.cases, rise.passed(), rise.describe()))
}

fn constant_rewards_fixed_point(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut drift = Tally::new("max parameter drift", 1e-12);
    for _ in 0..5 {
        let world = World::from_features(6, 3, vec![0.0, 0.0], uniform_vec(rng, 36, -1.0, 1.0))?;
        let rm = RewardModelSim { bias: rng.random_range(-5.0..5.0), ..RewardModelSim::exact() };
        let logits = uniform_vec(rng, 18, -2.0, 2.0);
        let policy: Policy = TabularPolicy::from_logits(6, 3, logits, 1.0)?.into();
        let prompts: Vec<usize> = (0..6).collect();
        let config = TrainConfig { steps: 200, ..small_config(Method::Ddorm, rng.random()) };
        let (trained, _) =
            train(&config, &world, TrainData::Ddorm { rm: &rm, prompts: &prompts }, policy.clone())?;
        drift.at_most(max_abs_diff(trained.params(), policy.params()));
    }
    Ok((drift.cases, drift.passed(), drift.describe()))
}

// ---------------------------------------------------------------------------
// metrics

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Vec<ScoredPair> {
    let draw = |rng: &mut ChaCha8Rng| {
        if tied {
            rng.random_range(0..8) as f64 / 4.0
        } else {
            rng.random_range(-3.0..3.0)
        }
    };
    (0..n).map(|_| ScoredPair::new(draw(rng), draw(rng))).collect()
}

fn auc_brute_force(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let mut mismatches = Tally::new("mismatches", 0.0);
    for case in 0..AUC_CASES {
        let n = rng.random_range(1..=50);
        let pairs = random_pairs(rng, n, case % 2 == 0);
        let same = roc_auc(&pairs)?.to_bits() == brute_force_auc(&pairs).to_bits();
        let accuracy = pairs.iter().filter(|p| p.chosen_score - p.rejected_score > 0.0).count()
            as f64
            / n as f64;
        let margin = pairs.iter().map(|p| p.chosen_score - p.rejected_score).sum::<f64>() / n as f64;
        let direct = pair_accuracy(&pairs)? == accuracy && mean_margin(&pairs)? == margin;
        mismatches.at_most(if same && direct { 0.0 } else { 1.0 });
    }
    Ok((mismatches.cases, mismatches.passed(), mismatches.describe()))
}

fn monotone_transform_invariance(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    // Dyadic scores keep every transform below exact in f64.
    let mut tally = Tally::new("violations", 0.0);
    for _ in 0..500 {
        let n = rng.random_range(1..=50);
        let pairs: Vec<ScoredPair> = (0..n)
            .map(|_| {
                ScoredPair::new(
                    rng.random_range(-40..=40) as f64 / 8.0,
                    rng.random_range(-40..=40) as f64 / 8.0,
                )
            })
            .collect();
        let map = |f: &dyn Fn(f64) -> f64| -> Vec<ScoredPair> {
            pairs.iter().map(|p| ScoredPair::new(f(p.chosen_score), f(p.rejected_score))).collect()
        };
        let cubic = map(&|x| x * x * x + x);
        let affine = map(&|x| 4.0 * x - 3.0);
        let mut ok = true;
        for t in [&cubic, &affine] {
            ok &= pair_accuracy(t)? == pair_accuracy(&pairs)?;
            ok &= roc_auc(t)? == roc_auc(&pairs)?;
        }
        ok &= mean_margin(&affine)? == 4.0 * mean_margin(&pairs)?;
        tally.flag(ok);
    }
    Ok((tally.cases, tally.passed(), format!("{} violations", tally.failures)))
}

fn evaluate_purity(rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<(usize, bool, String)> {
    let world = small_world(rng, 30, 3, 4)?;
    let prompts: Vec<usize> = (0..world.num_prompts()).collect();
    let pairs = sample_preferences(&world, 300, rng.random(), &prompts)?;
    let policy: Policy = LinearPolicy::random(4, 1.0, rng.random())?.into();
    let a = evaluate(&policy, &pairs, &world)?;
    let b = evaluate(&policy, &pairs, &world)?;
    let zero: Policy = TabularPolicy::zeros(30, 3, 1.0)?.into();
    let z = evaluate(&zero, &pairs, &world)?;
    let oracle = evaluate(&TrueRewardScorer, &pairs, &world)?;
    let recount = pairs
        .iter()
        .filter(|e| {
            world.true_reward(e.prompt_id, e.chosen_id).expect("valid")
                > world.true_reward(e.prompt_id, e.rejected_id).expect("valid")
        })
        .count() as f64
        / pairs.len() as f64;
    let ok = a == b
        && (z.pair_accuracy, z.auc, z.mean_margin) == (0.0, 0.5, 0.0)
        && oracle.pair_accuracy == recount;
    Ok((3, ok, format!("zero policy ({}, {}, {}); oracle accuracy {:.4}", z.pair_accuracy, z.auc, z.mean_margin, recount)))
}
