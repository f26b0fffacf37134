//! Experiment harness around `ddorm-core`: configuration, seeded runs,
//! robustness sweeps, SVG figures and the verification table.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, PolicyKind};
pub use error::{CliError, Result};
pub use run::{load_artifact, run_experiment, RunArtifact};
