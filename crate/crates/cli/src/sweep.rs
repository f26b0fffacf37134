//! Robustness sweeps: repeat a full run per grid value of one axis.

use crate::config::ExperimentConfig;
use crate::error::{write_file, CliError, Result};
use crate::run::{run_experiment, RunArtifact};
use ddorm_core::Distortion;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const SWEEP_HEADER: &str = "axis,value,method,seed,pair_accuracy,auc,mean_margin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NoiseStd,
    Scale,
    Bias,
    Distortion,
    /// DDO-RM step size; the DPO runs are unaffected.
    Eta,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NoiseStd => "noise_std",
            SweepAxis::Scale => "scale",
            SweepAxis::Bias => "bias",
            SweepAxis::Distortion => "distortion",
            SweepAxis::Eta => "eta",
        }
    }

    /// A copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut config = base.clone();
        if self == SweepAxis::Distortion {
            config.reward_model.distortion =
                value.parse::<Distortion>().map_err(|e| CliError::Config(format!("--grid: {e}")))?;
        } else {
            let x: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--grid: {value:?} is not a number")))?;
            match self {
                SweepAxis::NoiseStd => config.reward_model.noise_std = x,
                SweepAxis::Scale => config.reward_model.scale = x,
                SweepAxis::Bias => config.reward_model.bias = x,
                SweepAxis::Eta => config.ddorm.eta = x,
                SweepAxis::Distortion => unreachable!(),
            }
        }
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "noise_std" => SweepAxis::NoiseStd,
            "scale" => SweepAxis::Scale,
            "bias" => SweepAxis::Bias,
            "distortion" => SweepAxis::Distortion,
            "eta" => SweepAxis::Eta,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep axis {other:?} (expected noise_std, scale, bias, distortion or eta)"
                )))
            }
        })
    }
}

/// Split a comma-separated grid.
pub fn parse_grid(text: &str) -> Result<Vec<String>> {
    let values: Vec<String> =
        text.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::Config("--grid is empty".into()));
    }
    Ok(values)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub artifact: RunArtifact,
}

pub fn sweep_csv(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in points {
        for r in &p.artifact.runs {
            out.push_str(&format!(
                "{axis},{},{},{},{},{},{}\n",
                p.value, r.method, r.seed, r.pair_accuracy, r.auc, r.mean_margin
            ));
        }
        for m in &p.artifact.means {
            out.push_str(&format!(
                "{axis},{},{},mean,{},{},{}\n",
                p.value, m.method, m.pair_accuracy, m.auc, m.mean_margin
            ));
        }
    }
    out
}

/// Each grid point gets its own run directory `{axis}_{value}` under `out`;
/// the combined table goes to `out/sweep.csv`.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    grid: &[String],
    out: &Path,
    parallel: usize,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(CliError::Config("--grid is empty".into()));
    }
    // Validate every point before spending time on any run.
    let configs = grid.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(grid.len());
    for (value, config) in grid.iter().zip(&configs) {
        let artifact = run_experiment(config, &out.join(format!("{axis}_{value}")), parallel)?;
        points.push(SweepPoint { value: value.clone(), artifact });
    }
    write_file(&out.join("sweep.csv"), sweep_csv(axis, &points))?;
    Ok(points)
}

/// Whether a method's mean pair accuracy is nonincreasing along the grid.
/// Reported only; nothing requires it.
pub fn describe_trend(points: &[SweepPoint], method: &str) -> String {
    let accs: Vec<f64> = points
        .iter()
        .filter_map(|p| p.artifact.means.iter().find(|m| m.method == method))
        .map(|m| m.pair_accuracy)
        .collect();
    let nonincreasing = accs.windows(2).all(|w| w[1] <= w[0]);
    let listed: Vec<String> = accs.iter().map(|a| format!("{a:.4}")).collect();
    format!(
        "{method} mean pair accuracy along grid: [{}] ({})",
        listed.join(", "),
        if nonincreasing { "nonincreasing" } else { "not monotone" }
    )
}
