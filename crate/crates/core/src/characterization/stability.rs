use serde::{Deserialize, Serialize};

use super::{invalid, CharacterizationError};
use crate::controller::ImpedanceConfig;
use crate::device::{DeviceParams, DeviceState};
use crate::rig::Rig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityOptions {
    /// Allowed growth of successive same-sign peaks.
    pub epsilon: f64,
    /// Oscillation ignored during this initial window, s.
    pub transient: f64,
    /// Observation window after the transient, s.
    pub window: f64,
    /// Peaks smaller than this many encoder counts count as settled.
    pub noise_floor_counts: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            transient: 0.2,
            window: 2.0,
            noise_floor_counts: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityVerdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityStep {
    /// mNm/rad
    pub stiffness_k: f64,
    /// N/mm
    pub trigger_stiffness: f64,
    pub stable: bool,
    /// Geometric-mean ratio of successive same-sign peaks over the window;
    /// 0 when fewer than two peaks rise above the noise floor.
    pub peak_ratio: f64,
    pub peaks_counted: usize,
    pub hit_hard_stop: bool,
    /// Stable by the ratio rule but still oscillating above the noise floor
    /// at the end of the window.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweepResult {
    pub steps: Vec<StabilityStep>,
    /// mNm/rad
    pub max_stable_k: f64,
    /// N/mm
    pub max_stable_trigger_stiffness: f64,
    /// Force at the stable stiffness over the full stroke, capped by the amplifier, N.
    pub max_stable_force: f64,
    pub warnings: Vec<String>,
}

/// Raises the rendered stiffness in discrete steps, kicking the uncoupled
/// device with a torque impulse at each one, until oscillations grow.
pub fn stability_sweep(
    params: &DeviceParams,
    base_overlay: &ImpedanceConfig,
    k_start: f64,
    k_step: f64,
    k_max: f64,
    perturbation: f64,
    options: &StabilityOptions,
) -> Result<StabilitySweepResult, CharacterizationError> {
    if !(k_step > 0.0) {
        return invalid("K step must be > 0");
    }
    if !(perturbation > 0.0) {
        return invalid("perturbation impulse must be > 0");
    }
    if !(k_start < k_max) || k_start < 0.0 {
        return invalid(format!("need 0 <= K start < K max, got {k_start} and {k_max}"));
    }
    if options.epsilon < 0.0 || options.window <= 0.0 || options.transient < 0.0 {
        return invalid("bad stability options");
    }

    let mut steps = Vec::new();
    let mut warnings = Vec::new();
    let mut max_stable_k = f64::NAN;
    let count = ((k_max - k_start) / k_step + 1e-9).floor() as usize;
    for i in 0..=count {
        let k = k_start + i as f64 * k_step;
        let step = run_step(params, &base_overlay.clone().with_stiffness(k), perturbation, options)?;
        if step.ambiguous {
            warnings.push(format!("K = {k:.4} mNm/rad still oscillating at the end of the window"));
        }
        let stable = step.stable;
        steps.push(step);
        if !stable {
            break;
        }
        max_stable_k = k;
    }
    if steps.last().is_some_and(|s| s.stable) {
        warnings.push(format!("no instability found up to K = {k_max} mNm/rad"));
    }
    let max_stable_trigger_stiffness = params.trigger_stiffness(max_stable_k);
    let max_stable_force = (max_stable_trigger_stiffness * params.stroke).min(base_overlay.torque_limit / params.radius);
    Ok(StabilitySweepResult {
        steps,
        max_stable_k,
        max_stable_trigger_stiffness,
        max_stable_force,
        warnings,
    })
}

fn run_step(
    params: &DeviceParams,
    overlay: &ImpedanceConfig,
    perturbation: f64,
    options: &StabilityOptions,
) -> Result<StabilityStep, CharacterizationError> {
    let mut rig = Rig::new(params.clone(), overlay.clone(), DeviceState::at_rest(overlay.center))?;
    let period = overlay.period();
    let transient_ticks = (options.transient / period).round() as usize;
    let total_ticks = transient_ticks + (options.window / period).round() as usize;
    let limit = params.theta_limit();
    let cpt = params.encoder_counts_per_turn;

    let mut error = Vec::with_capacity(total_ticks);
    let mut hit_hard_stop = false;
    for tick in 0..total_ticks {
        // The kick is external, like a finger tap, so the amplifier limit
        // does not apply to it.
        let tap = if tick == 0 { perturbation / period / params.radius } else { 0.0 };
        let out = rig.tick_with(0.0, |_| tap)?;
        if tick >= transient_ticks && rig.device.theta.abs() >= limit {
            hit_hard_stop = true;
        }
        error.push(crate::device::dequantize_encoder(out.counts_after, cpt) - overlay.center);
    }

    let floor = options.noise_floor_counts * params.encoder_quantum();
    let peaks = half_cycle_peaks(&error[transient_ticks.min(error.len())..]);
    let above: Vec<f64> = peaks.into_iter().take_while(|&p| p >= floor).collect();

    let peak_ratio = if above.len() >= 2 {
        // Two half-cycles per same-sign period.
        (above[above.len() - 1] / above[0]).powf(2.0 / (above.len() - 1) as f64)
    } else {
        0.0
    };
    // Still striking the stops after the transient means the oscillation
    // grew until the travel clipped it.
    let stable = peak_ratio <= 1.0 + options.epsilon && !(hit_hard_stop && above.len() >= 2);
    let tail_active = error
        .iter()
        .rev()
        .take((0.25 / period) as usize)
        .any(|e| e.abs() >= floor);
    let ambiguous = stable && above.len() >= 2 && tail_active && peak_ratio > 1.0 - options.epsilon;

    Ok(StabilityStep {
        stiffness_k: overlay.stiffness,
        trigger_stiffness: params.trigger_stiffness(overlay.stiffness),
        stable,
        peak_ratio,
        peaks_counted: above.len(),
        hit_hard_stop,
        ambiguous,
    })
}

/// Largest |e| within each complete half-cycle (between sign changes).
fn half_cycle_peaks(e: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    let mut sign = 0.0;
    let mut current = 0.0_f64;
    let mut started = false;
    for &v in e {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if s != sign {
            if started {
                peaks.push(current);
            }
            // The first half-cycle is incomplete.
            started = sign != 0.0;
            sign = s;
            current = 0.0;
        }
        current = current.max(v.abs());
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_cycle_peaks_of_a_decaying_wave() {
        let e: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64 * 0.001;
                (-t).exp() * (std::f64::consts::TAU * 10.0 * t + 0.3).sin()
            })
            .collect();
        let p = half_cycle_peaks(&e);
        assert!(p.len() >= 17);
        assert!(p.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_ranges() {
        let params = DeviceParams::linear(7.91e-4, 5e-3);
        let base = ImpedanceConfig::spring(0.0, 48.0);
        let opts = StabilityOptions::default();
        assert!(stability_sweep(&params, &base, 5.0, 1.0, 5.0, 0.01, &opts).is_err());
        assert!(stability_sweep(&params, &base, 0.0, 0.0, 5.0, 0.01, &opts).is_err());
        assert!(stability_sweep(&params, &base, 0.0, 1.0, 5.0, 0.0, &opts).is_err());
    }

    #[test]
    fn zero_stiffness_is_stable() {
        let params = DeviceParams::linear(7.91e-4, 5e-3);
        let base = ImpedanceConfig::spring(0.0, 48.0);
        let res = stability_sweep(&params, &base, 0.0, 1.0, 1.0, 0.005, &StabilityOptions::default()).unwrap();
        assert!(res.steps[0].stable);
    }
}
