use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddorm_core::metrics::roc_auc;
use ddorm_core::simplex::{kl_prox_oracle, softmax_distribution};
use ddorm_core::trainer::ddorm_step;
use ddorm_core::{
    ddorm_target, generate_world, DdormStepParams, LinearPolicy, Policy, RewardModelSim,
    RewardVector, ScoreVector, ScoredPair, WorldSpec,
};
use std::hint::black_box;

fn instance(k: usize) -> (ScoreVector, RewardVector, DdormStepParams) {
    let scores = (0..k).map(|i| ((i * 7) % 5) as f64 * 0.6 - 1.2).collect();
    let rewards = (0..k).map(|i| ((i * 3) % 7) as f64 - 3.0).collect();
    (
        ScoreVector::new(scores, 1.0).unwrap(),
        RewardVector::new(rewards).unwrap(),
        DdormStepParams::new(2.0, 1.0).unwrap(),
    )
}

fn targets(c: &mut Criterion) {
    let mut group = c.benchmark_group("ddorm_target");
    for k in [2, 10, 100] {
        let (s, r, params) = instance(k);
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| ddorm_target(black_box(&s), black_box(&r), &params).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let (s, r, params) = instance(10);
    let p = softmax_distribution(&s);
    c.bench_function("kl_prox_oracle/10", |b| {
        b.iter(|| kl_prox_oracle(black_box(&p), black_box(&r), &params, 1e-11).unwrap())
    });
}

fn auc(c: &mut Criterion) {
    let pairs: Vec<ScoredPair> = (0..10_000)
        .map(|i| ScoredPair::new(((i * 37) % 101) as f64, ((i * 53) % 89) as f64))
        .collect();
    c.bench_function("roc_auc/10000", |b| b.iter(|| roc_auc(black_box(&pairs)).unwrap()));
}

fn training_step(c: &mut Criterion) {
    let world = generate_world(&WorldSpec {
        num_prompts: 16,
        candidates_per_prompt: 4,
        feature_dim: 8,
        true_reward_weights: vec![1.0, -0.8, 0.6, 0.5, -0.4, 0.3, -0.2, 0.1],
        seed: 1,
    })
    .unwrap();
    let policy: Policy = LinearPolicy::random(8, 1.0, 2).unwrap().into();
    let params = DdormStepParams::new(2.0, 1.0).unwrap();
    let rm = RewardModelSim::exact();
    c.bench_function("ddorm_step/k4_d8", |b| {
        b.iter(|| ddorm_step(black_box(&policy), &world, &rm, 3, &params).unwrap())
    });
}

criterion_group!(benches, targets, oracle, auc, training_step);
criterion_main!(benches);
