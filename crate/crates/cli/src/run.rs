//! Seeded seed × method experiment runs and their on-disk artifacts.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json
//! metrics/{method}_seed{seed}.json
//! logs/{method}_seed{seed}.jsonl
//! policies/{method}_seed{seed}.json
//! summary.csv
//! artifact.json
//! error.json            (only when some run failed)
//! ```

use crate::config::{ExperimentConfig, PolicyKind};
use crate::error::{read_file, write_file, CliError, Result};
use ddorm_core::world::{partition_prompts, sample_preferences};
use ddorm_core::{
    derive_seed, evaluate, generate_world, train, LinearPolicy, Method, MetricsReport, Policy,
    PreferenceExample, TabularPolicy, TrainData, TrainLog, TrueRewardScorer, World,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TOOL_VERSION: &str = concat!("ddorm ", env!("CARGO_PKG_VERSION"));
pub const METHODS: [Method; 2] = [Method::Ddorm, Method::Dpo];
pub const SUMMARY_HEADER: &str = "method,seed,pair_accuracy,auc,mean_margin";

// Streams of the run seed.
const PARTITION: u64 = 1;
const TRAIN_PAIRS: u64 = 2;
const TEST_PAIRS: u64 = 3;
const INIT: u64 = 4;
const TRAINING: u64 = 5;

/// Held-out metrics of one (method, seed) run, as written to
/// `metrics/{method}_seed{seed}.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub pair_accuracy: f64,
    pub auc: f64,
    pub mean_margin: f64,
    pub per_pair_margins: Vec<f64>,
}

impl MetricsRecord {
    pub fn new(method: &str, seed: u64, report: MetricsReport) -> Self {
        Self {
            method: method.to_string(),
            seed,
            n: report.n,
            pair_accuracy: report.pair_accuracy,
            auc: report.auc,
            mean_margin: report.mean_margin,
            per_pair_margins: report.per_pair_margins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanRow {
    pub method: String,
    pub pair_accuracy: f64,
    pub auc: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArtifact {
    pub tool_version: String,
    pub config: ExperimentConfig,
    /// Seed-major, methods in [`METHODS`] order.
    pub runs: Vec<MetricsRecord>,
    pub means: Vec<MeanRow>,
    /// The true-reward scorer on the same held-out pairs, one per seed.
    pub oracle: Vec<MetricsRecord>,
    /// Paths relative to the run directory.
    pub train_logs: Vec<String>,
}

/// Train/test prompts and labelled pairs for one run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedData {
    pub train_prompts: Vec<usize>,
    pub test_prompts: Vec<usize>,
    pub train_pairs: Vec<PreferenceExample>,
    pub test_pairs: Vec<PreferenceExample>,
}

/// The world depends only on the config; splits and initialization vary
/// with the run seed and are shared by both methods.
pub fn seed_data(config: &ExperimentConfig, world: &World, seed: u64) -> Result<SeedData> {
    let eval = &config.evaluation;
    let (train_prompts, test_prompts) =
        partition_prompts(world, eval.test_prompt_fraction, derive_seed(seed, PARTITION))?;
    let train_pairs =
        sample_preferences(world, eval.train_pairs, derive_seed(seed, TRAIN_PAIRS), &train_prompts)?;
    let test_pairs =
        sample_preferences(world, eval.test_pairs, derive_seed(seed, TEST_PAIRS), &test_prompts)?;
    Ok(SeedData { train_prompts, test_prompts, train_pairs, test_pairs })
}

pub fn initial_policy(config: &ExperimentConfig, method: Method, seed: u64) -> Result<Policy> {
    let tau = config.settings(method).tau;
    let world = &config.world;
    Ok(match config.policy {
        PolicyKind::Linear => {
            LinearPolicy::random(world.feature_dim, tau, derive_seed(seed, INIT))?.into()
        }
        PolicyKind::Tabular => {
            TabularPolicy::zeros(world.num_prompts, world.candidates_per_prompt, tau)?.into()
        }
    })
}

pub struct TrainedRun {
    pub policy: Policy,
    pub log: TrainLog,
    pub metrics: MetricsRecord,
}

/// Train one method on one seed and evaluate it on the held-out pairs.
pub fn train_one(
    config: &ExperimentConfig,
    world: &World,
    data: &SeedData,
    method: Method,
    seed: u64,
) -> Result<TrainedRun> {
    let train_config = config.settings(method).train_config(method, derive_seed(seed, TRAINING));
    let train_data = match method {
        Method::Ddorm => TrainData::Ddorm { rm: &config.reward_model, prompts: &data.train_prompts },
        Method::Dpo => TrainData::Dpo { examples: &data.train_pairs },
    };
    let (policy, log) = train(&train_config, world, train_data, initial_policy(config, method, seed)?)?;
    let report = evaluate(&policy, &data.test_pairs, world)?;
    Ok(TrainedRun { policy, log, metrics: MetricsRecord::new(method.as_str(), seed, report) })
}

pub fn run_stem(method: &str, seed: u64) -> String {
    format!("{method}_seed{seed}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn mean_rows(runs: &[MetricsRecord]) -> Vec<MeanRow> {
    METHODS
        .iter()
        .map(|method| {
            let rows: Vec<&MetricsRecord> =
                runs.iter().filter(|r| r.method == method.as_str()).collect();
            let n = rows.len() as f64;
            let mean = |f: fn(&MetricsRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            MeanRow {
                method: method.as_str().to_string(),
                pair_accuracy: mean(|r| r.pair_accuracy),
                auc: mean(|r| r.auc),
                mean_margin: mean(|r| r.mean_margin),
            }
        })
        .collect()
}

pub fn summary_csv(runs: &[MetricsRecord], means: &[MeanRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in runs {
        out.push_str(&format!("{},{},{},{},{}\n", r.method, r.seed, r.pair_accuracy, r.auc, r.mean_margin));
    }
    for m in means {
        out.push_str(&format!("{},mean,{},{},{}\n", m.method, m.pair_accuracy, m.auc, m.mean_margin));
    }
    out
}

#[derive(Serialize)]
struct Failure {
    method: String,
    seed: u64,
    error: String,
}

/// Run every seed × method, write all artifacts under `out` and return the
/// run artifact. `parallel` is the number of worker threads (at least 1).
pub fn run_experiment(config: &ExperimentConfig, out: &Path, parallel: usize) -> Result<RunArtifact> {
    config.validate()?;
    let world = generate_world(&config.world)?;
    write_file(&out.join("config.json"), config.to_json())?;
    let stale = out.join("error.json");
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
    }

    let jobs: Vec<(u64, Method)> =
        config.seeds.iter().flat_map(|&seed| METHODS.map(|m| (seed, m))).collect();
    let run_job = |&(seed, method): &(u64, Method)| -> Result<(MetricsRecord, String)> {
        let data = seed_data(config, &world, seed)?;
        let run = train_one(config, &world, &data, method, seed)?;
        let stem = run_stem(method.as_str(), seed);
        let log_path = format!("logs/{stem}.jsonl");
        write_file(&out.join(&log_path), run.log.to_json_lines())?;
        write_file(&out.join(format!("policies/{stem}.json")), to_json(&run.policy))?;
        write_file(&out.join(format!("metrics/{stem}.json")), to_json(&run.metrics))?;
        Ok((run.metrics, log_path))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| CliError::Artifact(format!("thread pool: {e}")))?;
    let results: Vec<Result<(MetricsRecord, String)>> =
        pool.install(|| jobs.par_iter().map(run_job).collect());

    let mut runs = Vec::with_capacity(jobs.len());
    let mut train_logs = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    for (&(seed, method), result) in jobs.iter().zip(results) {
        match result {
            Ok((metrics, log)) => {
                runs.push(metrics);
                train_logs.push(log);
            }
            Err(e) => failures.push(Failure {
                method: method.as_str().to_string(),
                seed,
                error: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        write_file(&out.join("error.json"), to_json(&serde_json::json!({ "failures": failures })))?;
        return Err(CliError::Artifact(format!(
            "{} of {} runs failed; partial artifacts and error.json in {}",
            failures.len(),
            jobs.len(),
            out.display()
        )));
    }

    let oracle = config
        .seeds
        .iter()
        .map(|&seed| {
            let data = seed_data(config, &world, seed)?;
            let report = evaluate(&TrueRewardScorer, &data.test_pairs, &world)?;
            Ok(MetricsRecord::new("oracle", seed, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let means = mean_rows(&runs);
    write_file(&out.join("summary.csv"), summary_csv(&runs, &means))?;
    let artifact = RunArtifact {
        tool_version: TOOL_VERSION.to_string(),
        config: config.clone(),
        runs,
        means,
        oracle,
        train_logs,
    };
    write_file(&out.join("artifact.json"), to_json(&artifact))?;
    Ok(artifact)
}

pub fn load_artifact(run_dir: &Path) -> Result<RunArtifact> {
    let path = run_dir.join("artifact.json");
    if !path.exists() {
        return Err(CliError::Artifact(format!("missing {}", path.display())));
    }
    serde_json::from_str(&read_file(&path)?)
        .map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_are_arithmetic() {
        let record = |method: &str, seed, acc| MetricsRecord {
            method: method.into(),
            seed,
            n: 1,
            pair_accuracy: acc,
            auc: acc,
            mean_margin: -acc,
            per_pair_margins: vec![],
        };
        let runs = vec![record("ddorm", 1, 0.5), record("dpo", 1, 0.25), record("ddorm", 2, 0.75), record("dpo", 2, 0.5)];
        let means = mean_rows(&runs);
        assert_eq!(means[0].pair_accuracy, 0.625);
        assert_eq!(means[1].mean_margin, -0.375);
        let csv = summary_csv(&runs, &means);
        assert!(csv.starts_with("method,seed,pair_accuracy,auc,mean_margin\n"));
        assert!(csv.ends_with("dpo,mean,0.375,0.375,-0.375\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
