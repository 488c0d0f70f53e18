use serde::{Deserialize, Serialize};

use super::{invalid, CharacterizationError};
use crate::controller::ImpedanceConfig;
use crate::device::{reflect_torque_to_force, DeviceParams, DeviceState};
use crate::rig::Rig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionOptions {
    /// Hz
    pub loop_rate: f64,
    /// Ramp gives up at this torque, mNm. Defaults to the amplifier peak.
    pub torque_limit: Option<f64>,
}

impl Default for FrictionOptions {
    fn default() -> Self {
        Self {
            loop_rate: 1000.0,
            torque_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionSample {
    /// rad
    pub theta: f64,
    /// Commanded torque when the encoder first moved, mNm. `None` means no
    /// breakaway before the torque limit.
    pub breakaway_torque: Option<f64>,
    /// N
    pub breakaway_force: Option<f64>,
    /// Profile value at `theta`, mNm.
    pub configured_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionTestResult {
    pub samples: Vec<FrictionSample>,
    pub min_torque: f64,
    pub max_torque: f64,
    pub mean_torque: f64,
    pub min_force: f64,
    pub max_force: f64,
    pub mean_force: f64,
    /// Positions where no breakaway was seen.
    pub no_breakaway: Vec<f64>,
}

/// `n` positions evenly spread over 90% of the travel.
pub fn default_positions(params: &DeviceParams, n: usize) -> Vec<f64> {
    let span = 0.9 * params.theta_limit();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Ramps motor torque from rest at each position and records the torque at
/// the first encoder count change.
pub fn friction_test(
    params: &DeviceParams,
    positions: &[f64],
    ramp_rate: f64,
    options: &FrictionOptions,
) -> Result<FrictionTestResult, CharacterizationError> {
    if !(ramp_rate > 0.0) || !ramp_rate.is_finite() {
        return invalid("ramp rate must be > 0");
    }
    if positions.is_empty() {
        return invalid("no test positions");
    }
    let limit = params.theta_limit();
    if let Some(p) = positions.iter().find(|p| !p.is_finite() || p.abs() >= limit) {
        return invalid(format!("position {p} rad outside travel ±{limit}"));
    }
    let torque_limit = options.torque_limit.unwrap_or_else(|| params.peak_torque());
    // Open loop: the controller renders nothing and the ramp is fed directly.
    let overlay = ImpedanceConfig {
        loop_rate: options.loop_rate,
        torque_limit,
        ..ImpedanceConfig::spring(0.0, torque_limit)
    };
    let period = overlay.period();

    let mut samples = Vec::with_capacity(positions.len());
    for &theta in positions {
        let mut rig = Rig::new(params.clone(), overlay.clone(), DeviceState::at_rest(theta))?;
        let start = rig.counts()?;
        let mut breakaway = None;
        let mut k = 1u64;
        loop {
            let torque = ramp_rate * k as f64 * period;
            if torque > torque_limit {
                break;
            }
            let out = rig.tick(torque)?;
            if out.counts_after != start {
                breakaway = Some(torque);
                break;
            }
            k += 1;
        }
        samples.push(FrictionSample {
            theta,
            breakaway_torque: breakaway,
            breakaway_force: breakaway.map(|t| reflect_torque_to_force(params, t)).transpose()?,
            configured_torque: params.stiction_profile.at(theta),
        });
    }

    let torques: Vec<f64> = samples.iter().filter_map(|s| s.breakaway_torque).collect();
    let no_breakaway = samples
        .iter()
        .filter(|s| s.breakaway_torque.is_none())
        .map(|s| s.theta)
        .collect();
    let (min_torque, max_torque, mean_torque) = summary(&torques);
    let r = params.radius;
    Ok(FrictionTestResult {
        samples,
        min_torque,
        max_torque,
        mean_torque,
        min_force: min_torque / r,
        max_force: max_torque / r,
        mean_force: mean_torque / r,
        no_breakaway,
    })
}

fn summary(v: &[f64]) -> (f64, f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max, v.iter().sum::<f64>() / v.len() as f64)
}
