mod common;

use common::*;
use ddorm_cli::plot::{mean_metrics_svg, plot_run, MEAN_FIGURE, SEED_FIGURE};
use ddorm_cli::sweep::{run_sweep, SweepAxis, SWEEP_HEADER};
use ddorm_cli::{load_artifact, run_experiment};
use ddorm_core::world::rm_scores;
use ddorm_core::{ddorm_target, generate_world, DdormStepParams, RewardModelSim, ScoreVector};
use std::collections::BTreeMap;

fn grid(values: &[&str]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

#[test]
fn bias_sweep_leaves_ddorm_metrics_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let points = run_sweep(&small_config(), SweepAxis::Bias, &grid(&["-10", "0", "10"]), dir.path(), 2).unwrap();
    let ddorm = |i: usize| -> Vec<(f64, f64, f64)> {
        points[i].artifact.runs.iter().filter(|r| r.method == "ddorm").map(|r| (r.pair_accuracy, r.auc, r.mean_margin)).collect()
    };
    for i in [0, 2] {
        for (a, b) in ddorm(i).iter().zip(ddorm(1)) {
            assert!((a.0 - b.0).abs() <= 1e-10 && (a.1 - b.1).abs() <= 1e-10 && (a.2 - b.2).abs() <= 1e-10);
        }
    }
    let csv = read(&dir.path().join("sweep.csv"));
    assert_eq!(csv.lines().next(), Some(SWEEP_HEADER));
    assert_eq!(csv.lines().count(), 1 + 3 * 8);
    assert!(dir.path().join("bias_-10/summary.csv").exists());
}

#[test]
fn positive_rm_scaling_keeps_the_target_argmax_at_a_uniform_policy() {
    let config = small_config();
    let world = generate_world(&config.world).unwrap();
    let params = DdormStepParams::new(config.ddorm.eta, config.ddorm.tau).unwrap();
    let uniform = ScoreVector::new(vec![0.0; world.candidates_per_prompt()], config.ddorm.tau).unwrap();
    for prompt in 0..world.num_prompts() {
        let argmaxes: Vec<usize> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&scale| {
                let sim = RewardModelSim { scale, ..RewardModelSim::exact() };
                ddorm_target(&uniform, &rm_scores(&sim, &world, prompt).unwrap(), &params).unwrap().argmax()
            })
            .collect();
        assert!(argmaxes.windows(2).all(|w| w[0] == w[1]), "prompt {prompt}: {argmaxes:?}");
    }
}

#[test]
fn noise_sweep_reports_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.seeds = vec![42];
    let values = grid(&["0", "0.1", "1", "10"]);
    let points = run_sweep(&config, SweepAxis::NoiseStd, &values, dir.path(), 1).unwrap();
    assert_eq!(points.len(), 4);
    let csv = read(&dir.path().join("sweep.csv"));
    for v in &values {
        assert!(csv.lines().any(|l| l.starts_with(&format!("noise_std,{v},ddorm,42,"))));
    }
}

#[test]
fn sweep_cli_rejects_bad_axes_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let config = config.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(ddorm(&["sweep", "--config", config, "--axis", "tau", "--grid", "1", "--out", out]).status.code(), Some(2));
    assert_eq!(ddorm(&["sweep", "--config", config, "--axis", "scale", "--grid", ",", "--out", out]).status.code(), Some(2));
    assert_eq!(ddorm(&["sweep", "--config", config, "--axis", "scale", "--grid", "-1", "--out", out]).status.code(), Some(2));
}

fn summary_means(run_dir: &std::path::Path) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    let csv = read(&run_dir.join("summary.csv"));
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1] != "mean" {
            continue;
        }
        for (col, cell) in header.iter().zip(&cells).skip(2) {
            out.insert((cells[0].to_string(), col.to_string()), cell.parse().unwrap());
        }
    }
    out
}

#[test]
fn plots_are_well_formed_and_match_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    run_experiment(&small_config(), &run_dir, 2).unwrap();
    let config = run_dir.to_str().unwrap();
    let out = ddorm(&["plot", "--run", config]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    let svgs: Vec<_> = std::fs::read_dir(&run_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 2);

    let expected = summary_means(&run_dir);
    let mean_svg = read(&run_dir.join(MEAN_FIGURE));
    let doc = roxmltree::Document::parse(&mean_svg).unwrap();
    let mut bars = 0;
    for panel in doc.descendants().filter(|n| n.attribute("class") == Some("panel")) {
        let attr = |name: &str| panel.attribute(name).unwrap().parse::<f64>().unwrap();
        let (lo, hi, plot_height) = (attr("data-min"), attr("data-max"), attr("data-plot-height"));
        for bar in panel.children().filter(|n| n.attribute("class") == Some("bar")) {
            let key = (bar.attribute("data-method").unwrap().to_string(), bar.attribute("data-metric").unwrap().to_string());
            let value: f64 = bar.attribute("data-value").unwrap().parse().unwrap();
            assert!((value - expected[&key]).abs() <= 1e-6, "{key:?}");
            // Recover the value from the drawn geometry as well.
            let height: f64 = bar.attribute("height").unwrap().parse().unwrap();
            let drawn = height / plot_height * (hi - lo) * value.signum();
            assert!((drawn - expected[&key]).abs() <= 1e-6, "{key:?}: drawn {drawn}");
            bars += 1;
        }
    }
    assert_eq!(bars, 6);

    let artifact = load_artifact(&run_dir).unwrap();
    let seed_svg = read(&run_dir.join(SEED_FIGURE));
    let doc = roxmltree::Document::parse(&seed_svg).unwrap();
    let points: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("point")).collect();
    assert_eq!(points.len(), artifact.runs.len());
    for point in points {
        let seed: u64 = point.attribute("data-seed").unwrap().parse().unwrap();
        let method = point.attribute("data-method").unwrap();
        let value: f64 = point.attribute("data-value").unwrap().parse().unwrap();
        let run = artifact.runs.iter().find(|r| r.seed == seed && r.method == method).unwrap();
        assert!((value - run.pair_accuracy).abs() <= 1e-6);
    }
}

#[test]
fn plot_errors_are_descriptive() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddorm(&["plot", "--run", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("artifact.json"));

    let run_dir = dir.path().join("run");
    let mut artifact = run_experiment(&small_config(), &run_dir, 1).unwrap();
    artifact.config.seeds.clear();
    artifact.runs.clear();
    let err = mean_metrics_svg(&artifact).unwrap_err();
    assert!(err.to_string().contains("no seeds in artifact"));

    std::fs::write(run_dir.join("artifact.json"), serde_json::to_string(&artifact).unwrap()).unwrap();
    let err = plot_run(&run_dir).unwrap_err();
    assert!(err.to_string().contains("no seeds in artifact"));
}
