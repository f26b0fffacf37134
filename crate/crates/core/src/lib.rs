//! Finite-candidate KL policy improvement (DDO-RM) with a DPO baseline,
//! a synthetic preference world and held-out pairwise metrics.
//!
//! The improvement step lives in [`simplex`]: given policy scores `s`,
//! temperature `τ`, step size `η` and rewards `r`, it builds
//! `q = softmax((s + η (r − E_p[r])) / τ)`, the maximizer of
//! `⟨u, r⟩ − (τ/η) KL(u‖p)` over the simplex. [`trainer`] distills `q`
//! back into a parametric policy.

pub mod error;
pub mod metrics;
pub mod objectives;
pub mod oracle;
pub mod policy;
pub mod simplex;
pub mod trainer;
pub mod verify;
pub mod world;

pub use error::{Error, Result};
pub use metrics::{evaluate, metrics_report, MetricsReport, ScoredPair};
pub use objectives::{ddorm_loss, dpo_loss, DpoInputs, RlhfDiagnostic};
pub use policy::{LinearPolicy, Policy, ReferenceSnapshot, Scorer, TabularPolicy, TrueRewardScorer};
pub use simplex::{
    ddorm_target, softmax, DdormStepParams, DecisionDistribution, RewardVector, ScoreVector,
};
pub use trainer::{train, Method, TrainConfig, TrainData, TrainLog, TrainRecord};
pub use world::{
    derive_seed, generate_world, Distortion, PreferenceExample, RewardModelSim, World, WorldSpec,
};
