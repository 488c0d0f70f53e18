//! Encoder-based impedance loop: a virtual spring and damper about a center
//! angle, saturated at a torque limit.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{dequantize_encoder, DeviceParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid impedance configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown condition {0:?} (expected \"handheld\" or \"knob\")")]
    UnknownCondition(String),
}

/// Input device used in a study condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Handheld,
    Knob,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Handheld, Condition::Knob];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Handheld => "handheld",
            Condition::Knob => "knob",
        }
    }

    /// Unit tag of the deflection this condition reports.
    pub fn deflection_unit(self) -> &'static str {
        match self {
            Condition::Handheld => "mm",
            Condition::Knob => "rad",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "handheld" => Ok(Condition::Handheld),
            "knob" => Ok(Condition::Knob),
            other => Err(ControlError::UnknownCondition(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceConfig {
    /// mNm/rad
    #[serde(rename = "stiffness_K")]
    pub stiffness: f64,
    /// mNm/(rad/s)
    #[serde(rename = "damping_B")]
    pub damping: f64,
    /// rad
    pub center: f64,
    /// mNm
    pub torque_limit: f64,
    /// Hz
    pub loop_rate: f64,
    /// Hz
    pub velocity_filter_cutoff: f64,
    /// Trigger-side stiffness this config was built from, mNm per mm of
    /// trigger travel. Kept verbatim next to the converted `stiffness_K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_stiffness: Option<f64>,
}

impl Default for ImpedanceConfig {
    fn default() -> Self {
        Self {
            stiffness: 0.0,
            damping: 0.0,
            center: 0.0,
            torque_limit: DeviceParams::default().peak_torque(),
            loop_rate: 1000.0,
            velocity_filter_cutoff: 50.0,
            trigger_stiffness: None,
        }
    }
}

impl ImpedanceConfig {
    pub fn spring(stiffness: f64, torque_limit: f64) -> Self {
        Self {
            stiffness,
            torque_limit,
            ..Self::default()
        }
    }

    /// Builds a config from a stiffness expressed as torque per mm of trigger
    /// travel. With x = r·θ, a torque of `k·x` per shaft radian is `k·r` mNm/rad.
    pub fn from_trigger_stiffness(mnm_per_mm: f64, radius_mm: f64, torque_limit: f64) -> Self {
        Self {
            stiffness: mnm_per_mm * radius_mm,
            torque_limit,
            trigger_stiffness: Some(mnm_per_mm),
            ..Self::default()
        }
    }

    pub fn with_stiffness(mut self, stiffness: f64) -> Self {
        self.stiffness = stiffness;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn period(&self) -> f64 {
        1.0 / self.loop_rate
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let vals = [
            self.stiffness,
            self.damping,
            self.center,
            self.torque_limit,
            self.loop_rate,
            self.velocity_filter_cutoff,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidConfig("non-finite value".into()));
        }
        if self.stiffness < 0.0 || self.damping < 0.0 {
            return Err(ControlError::InvalidConfig("stiffness_K and damping_B must be >= 0".into()));
        }
        if self.torque_limit <= 0.0 || self.loop_rate <= 0.0 {
            return Err(ControlError::InvalidConfig("torque_limit and loop_rate must be > 0".into()));
        }
        if self.velocity_filter_cutoff <= 0.0 {
            return Err(ControlError::InvalidConfig("velocity_filter_cutoff must be > 0".into()));
        }
        Ok(())
    }

    /// Smoothing factor of the first-order velocity filter at this loop rate.
    fn filter_alpha(&self) -> f64 {
        (-TAU * self.velocity_filter_cutoff / self.loop_rate).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub prev_theta: Option<f64>,
    /// Filtered velocity estimate, rad/s.
    pub velocity: f64,
    /// Set when the last command hit the torque limit.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderReading {
    pub counts: i64,
    pub counts_per_turn: u32,
}

impl EncoderReading {
    pub fn angle(&self) -> f64 {
        dequantize_encoder(self.counts, self.counts_per_turn)
    }
}

/// One tick of the impedance loop. Returns the motor torque command.
pub fn control_step(
    cfg: &ImpedanceConfig,
    reading: EncoderReading,
    prev: &ControllerState,
) -> (f64, ControllerState) {
    let theta = reading.angle();
    let raw_velocity = prev.prev_theta.map_or(0.0, |p| (theta - p) * cfg.loop_rate);
    let alpha = cfg.filter_alpha();
    let velocity = alpha * prev.velocity + (1.0 - alpha) * raw_velocity;

    let command = -cfg.stiffness * (theta - cfg.center) - cfg.damping * velocity;
    let torque = command.clamp(-cfg.torque_limit, cfg.torque_limit);
    let state = ControllerState {
        prev_theta: Some(theta),
        velocity,
        saturated: command.abs() > cfg.torque_limit,
    };
    (torque, state)
}

/// Nominal grip-side stiffness of the handheld overlay, mNm per mm of trigger travel.
pub const HANDHELD_OVERLAY_MNM_PER_MM: f64 = 7.4;
/// Knob overlay stiffness, mNm/rad.
pub const KNOB_OVERLAY_MNM_PER_RAD: f64 = 7.5;

/// Centering overlay used in the study for each input device.
///
/// The handheld stiffness is quoted per mm of trigger travel and is converted
/// to a shaft stiffness with the device's reduction radius.
pub fn overlay_for_condition(condition: Condition, device: &DeviceParams) -> ImpedanceConfig {
    match condition {
        Condition::Knob => ImpedanceConfig::spring(KNOB_OVERLAY_MNM_PER_RAD, device.peak_torque()),
        Condition::Handheld => ImpedanceConfig::from_trigger_stiffness(
            HANDHELD_OVERLAY_MNM_PER_MM,
            device.radius,
            device.peak_torque(),
        ),
    }
}
