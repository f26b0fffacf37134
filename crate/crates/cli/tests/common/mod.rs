#![allow(dead_code)]

use ddorm_cli::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_config(name: &str) -> PathBuf {
    workspace_root().join("configs").join(name)
}

pub fn ddorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddorm")).args(args).output().expect("binary runs")
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// A scaled-down config for tests that only exercise plumbing.
pub fn small_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.world.num_prompts = 40;
    config.evaluation.train_pairs = 200;
    config.evaluation.test_pairs = 100;
    config.ddorm.steps = 200;
    config.dpo.steps = 200;
    config
}

pub fn write_config(dir: &Path, config: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_json()).unwrap();
    path
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
