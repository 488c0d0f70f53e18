//! Bench characterization runs with CSV and JSON exports.

use std::path::Path;

use haptikit_core::characterization::{
    default_positions, friction_test, make_chirp, measure_frf, stability_sweep, FrfOptions, FrfResult, FrictionOptions,
    FrictionTestResult, StabilityOptions, StabilitySweepResult,
};
use haptikit_core::controller::ImpedanceConfig;
use haptikit_core::device::DeviceParams;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    /// mNm/rad
    pub k_start: f64,
    pub k_step: f64,
    pub k_max: f64,
    /// Tap applied at the grip on the first tick, mNm·s.
    pub perturbation: f64,
    pub options: StabilityOptions,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            k_start: 0.0,
            k_step: 0.25,
            k_max: 40.0,
            perturbation: 0.2,
            options: StabilityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionConfig {
    pub positions: usize,
    /// mNm/s
    pub ramp_rate: f64,
    pub options: FrictionOptions,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        Self {
            positions: 16,
            ramp_rate: 0.5,
            options: FrictionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrfConfig {
    /// Hz
    pub f0: f64,
    pub f1: f64,
    /// s
    pub duration: f64,
    /// mNm
    pub amplitude: f64,
    /// Overlay during the measurement, mNm/rad.
    pub stiffness: f64,
    /// mNm/(rad/s)
    pub damping: f64,
    pub runs: usize,
    pub options: FrfOptions,
}

impl Default for FrfConfig {
    /// A 2 mNm/rad spring puts the resonance near 8 Hz. The overlay damping
    /// and 3 mNm drive keep the resonant swing inside the travel.
    fn default() -> Self {
        Self {
            f0: 0.1,
            f1: 100.0,
            duration: 30.0,
            amplitude: 3.0,
            stiffness: 2.0,
            damping: 0.02,
            runs: 10,
            options: FrfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacterizeConfig {
    pub device: DeviceParams,
    pub stability: StabilityConfig,
    pub friction: FrictionConfig,
    pub frf: FrfConfig,
}

impl CharacterizeConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.device.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn run_stability(cfg: &CharacterizeConfig) -> Result<StabilitySweepResult, Error> {
    let s = &cfg.stability;
    let base = ImpedanceConfig::spring(0.0, cfg.device.peak_torque());
    Ok(stability_sweep(&cfg.device, &base, s.k_start, s.k_step, s.k_max, s.perturbation, &s.options)?)
}

pub fn run_friction(cfg: &CharacterizeConfig) -> Result<FrictionTestResult, Error> {
    let f = &cfg.friction;
    let positions = default_positions(&cfg.device, f.positions);
    Ok(friction_test(&cfg.device, &positions, f.ramp_rate, &f.options)?)
}

pub fn run_frf(cfg: &CharacterizeConfig) -> Result<FrfResult, Error> {
    let f = &cfg.frf;
    let overlay = ImpedanceConfig::spring(f.stiffness, cfg.device.peak_torque()).with_damping(f.damping);
    let chirp = make_chirp(f.f0, f.f1, f.duration, f.amplitude, overlay.loop_rate)?;
    Ok(measure_frf(&cfg.device, &overlay, &chirp, f.runs, &f.options)?)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Session(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Log(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn export_stability(res: &StabilitySweepResult, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["stiffness_k", "trigger_stiffness", "stable", "peak_ratio", "peaks_counted", "hit_hard_stop", "ambiguous"])
        .map_err(|e| csv_err(&path, e))?;
    for s in &res.steps {
        w.write_record([
            s.stiffness_k.to_string(),
            s.trigger_stiffness.to_string(),
            s.stable.to_string(),
            s.peak_ratio.to_string(),
            s.peaks_counted.to_string(),
            s.hit_hard_stop.to_string(),
            s.ambiguous.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(res, &dir.join("stability.json"))
}

pub fn export_friction(res: &FrictionTestResult, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("friction.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["theta", "configured_torque", "breakaway_torque", "breakaway_force"])
        .map_err(|e| csv_err(&path, e))?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for s in &res.samples {
        w.write_record([
            s.theta.to_string(),
            s.configured_torque.to_string(),
            opt(s.breakaway_torque),
            opt(s.breakaway_force),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(res, &dir.join("friction.json"))
}

pub fn export_frf(res: &FrfResult, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("frf.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["frequency_hz", "magnitude_rad_per_mnm", "phase_deg", "coherence"])
        .map_err(|e| csv_err(&path, e))?;
    for i in 0..res.frequencies.len() {
        w.write_record([
            res.frequencies[i].to_string(),
            res.magnitude[i].to_string(),
            res.phase[i].to_string(),
            res.coherence[i].to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(res, &dir.join("frf.json"))
}
