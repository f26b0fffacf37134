//! Plain-text SVG figures for a finished run.
//!
//! Every bar and point carries its value in a `data-value` attribute, and
//! each bar panel records its value range in `data-min`/`data-max`, so the
//! figures can be checked against `summary.csv` without a renderer.

use crate::error::{write_file, CliError, Result};
use crate::run::{load_artifact, RunArtifact, METHODS};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MEAN_FIGURE: &str = "mean_metrics.svg";
pub const SEED_FIGURE: &str = "seed_pair_accuracy.svg";

const METRICS: [&str; 3] = ["pair_accuracy", "auc", "mean_margin"];
const PANEL_WIDTH: f64 = 260.0;
const PLOT_HEIGHT: f64 = 200.0;
const TOP: f64 = 50.0;

fn color(method: &str) -> &'static str {
    match method {
        "ddorm" => "#1f77b4",
        "dpo" => "#ff7f0e",
        _ => "#7f7f7f",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(width: f64, height: f64, title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        width / 2.0,
        escape(title)
    )
}

/// Value range of a bar panel: always includes 0, padded by 10% on the
/// side(s) that hold data.
fn bar_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(0.0, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    if hi == lo {
        return (lo, lo + 1.0);
    }
    (lo * 1.1, hi * 1.1)
}

fn check_seeds(artifact: &RunArtifact) -> Result<()> {
    if artifact.config.seeds.is_empty() || artifact.runs.is_empty() {
        return Err(CliError::Artifact("no seeds in artifact".into()));
    }
    Ok(())
}

/// Grouped bars of the per-method means, one panel per metric.
pub fn mean_metrics_svg(artifact: &RunArtifact) -> Result<String> {
    check_seeds(artifact)?;
    let width = PANEL_WIDTH * METRICS.len() as f64 + 40.0;
    let mut svg = header(width, TOP + PLOT_HEIGHT + 70.0, "Mean held-out metrics across seeds");
    let bar_width = 60.0;
    for (panel, metric) in METRICS.iter().enumerate() {
        let values: Vec<f64> = artifact
            .means
            .iter()
            .map(|m| match *metric {
                "pair_accuracy" => m.pair_accuracy,
                "auc" => m.auc,
                _ => m.mean_margin,
            })
            .collect();
        let (lo, hi) = bar_range(&values);
        let px_per_unit = PLOT_HEIGHT / (hi - lo);
        let left = 30.0 + panel as f64 * PANEL_WIDTH;
        let baseline = TOP + hi * px_per_unit;
        let _ = writeln!(
            svg,
            "<g class=\"panel\" data-metric=\"{metric}\" data-min=\"{lo}\" data-max=\"{hi}\" data-top=\"{TOP}\" data-plot-height=\"{PLOT_HEIGHT}\">"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{metric}</text>",
            left + PANEL_WIDTH / 2.0 - 15.0,
            TOP - 10.0
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{left:.1}\" y1=\"{baseline:.6}\" x2=\"{:.1}\" y2=\"{baseline:.6}\" stroke=\"black\"/>",
            left + PANEL_WIDTH - 30.0
        );
        for (i, (mean, value)) in artifact.means.iter().zip(&values).enumerate() {
            let x = left + 30.0 + i as f64 * (bar_width + 40.0);
            let height = value.abs() * px_per_unit;
            let y = if *value >= 0.0 { baseline - height } else { baseline };
            let method = escape(&mean.method);
            let _ = writeln!(
                svg,
                "<rect class=\"bar\" data-method=\"{method}\" data-metric=\"{metric}\" data-value=\"{value}\" x=\"{x:.1}\" y=\"{y:.6}\" width=\"{bar_width}\" height=\"{height:.6}\" fill=\"{}\"/>",
                color(&mean.method)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{method} {value:.4}</text>",
                x + bar_width / 2.0,
                TOP + PLOT_HEIGHT + 20.0
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Pair accuracy per seed, one line of points per method.
pub fn seed_pair_accuracy_svg(artifact: &RunArtifact) -> Result<String> {
    check_seeds(artifact)?;
    let seeds = &artifact.config.seeds;
    let step = 120.0;
    let left = 70.0;
    let width = left + step * seeds.len() as f64 + 60.0;
    let mut svg = header(width, TOP + PLOT_HEIGHT + 80.0, "Held-out pair accuracy per seed");

    let accs: Vec<f64> = artifact.runs.iter().map(|r| r.pair_accuracy).collect();
    let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.1).max(0.01);
    let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(1.0));
    let y_of = |v: f64| TOP + (hi - v) / (hi - lo) * PLOT_HEIGHT;
    let x_of = |i: usize| left + step * (i as f64 + 0.5);

    let _ = writeln!(
        svg,
        "<g class=\"axes\" data-min=\"{lo}\" data-max=\"{hi}\">\n\
         <line x1=\"{left}\" y1=\"{TOP}\" x2=\"{left}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{hi:.3}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{lo:.3}</text>\n</g>",
        TOP + PLOT_HEIGHT,
        TOP + PLOT_HEIGHT,
        width - 40.0,
        TOP + PLOT_HEIGHT,
        left - 6.0,
        TOP + 4.0,
        left - 6.0,
        TOP + PLOT_HEIGHT,
    );
    for (i, seed) in seeds.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">seed {seed}</text>",
            x_of(i),
            TOP + PLOT_HEIGHT + 18.0
        );
    }
    for (m, method) in METHODS.iter().map(|m| m.as_str()).enumerate() {
        let points: Vec<(usize, u64, f64)> = seeds
            .iter()
            .enumerate()
            .filter_map(|(i, &seed)| {
                artifact
                    .runs
                    .iter()
                    .find(|r| r.method == method && r.seed == seed)
                    .map(|r| (i, seed, r.pair_accuracy))
            })
            .collect();
        let path: Vec<String> =
            points.iter().map(|&(i, _, v)| format!("{:.3},{:.6}", x_of(i), y_of(v))).collect();
        let _ = writeln!(
            svg,
            "<g class=\"series\" data-method=\"{method}\">\n<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
            path.join(" "),
            color(method)
        );
        for (i, seed, v) in points {
            let _ = writeln!(
                svg,
                "<circle class=\"point\" data-method=\"{method}\" data-seed=\"{seed}\" data-value=\"{v}\" cx=\"{:.3}\" cy=\"{:.6}\" r=\"5\" fill=\"{}\"/>",
                x_of(i),
                y_of(v),
                color(method)
            );
        }
        let legend_y = TOP + PLOT_HEIGHT + 45.0;
        let legend_x = left + 140.0 * m as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{legend_x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{legend_y:.1}\" font-family=\"sans-serif\" font-size=\"12\">{method}</text>\n</g>",
            legend_y - 10.0,
            color(method),
            legend_x + 18.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Write both figures into `run_dir` and return their paths.
pub fn plot_run(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let artifact = load_artifact(run_dir)?;
    let figures = [
        (MEAN_FIGURE, mean_metrics_svg(&artifact)?),
        (SEED_FIGURE, seed_pair_accuracy_svg(&artifact)?),
    ];
    let mut written = Vec::new();
    for (name, svg) in figures {
        let path = run_dir.join(name);
        write_file(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
