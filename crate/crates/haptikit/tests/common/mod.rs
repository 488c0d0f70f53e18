#![allow(dead_code)]

use std::path::{Path, PathBuf};

use haptikit::config::SessionConfig;
use haptikit::synthetic::simulate_to_dir;

/// A session small enough for tests: 2 training and 6 test targeting trials
/// per device and the four test tracking segments.
pub fn short_config(participant: u32, seed: u64) -> SessionConfig {
    let mut cfg = SessionConfig::for_participant(participant, seed);
    cfg.plan.targeting.training_trials = 2;
    cfg.plan.targeting.test_trials = 6;
    cfg.plan.tracking.include_training = false;
    cfg
}

pub fn simulate(cfg: &SessionConfig, dir: &Path) -> PathBuf {
    simulate_to_dir(cfg, dir).expect("synthetic session").0.log
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

pub fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}
