use serde::{Deserialize, Serialize};

use super::{invalid, HarnessError};
use crate::controller::Condition;

/// Rate (joystick-like) control from device deflection to cursor velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub mode: Condition,
    /// px/s per mm (handheld) or per rad (knob).
    pub rate_gain: f64,
    /// Deflections with magnitude up to this are treated as zero.
    pub deadzone: f64,
    /// px
    pub screen_width: f64,
}

/// Cursor speed at full deflection for both devices, px/s.
pub const FULL_DEFLECTION_SPEED: f64 = 300.0;

impl MappingConfig {
    /// Full deflection is half the 15 mm stroke.
    pub fn handheld() -> Self {
        Self {
            mode: Condition::Handheld,
            rate_gain: FULL_DEFLECTION_SPEED / 7.5,
            deadzone: 0.1,
            screen_width: 1920.0,
        }
    }

    /// Full deflection is a quarter turn.
    pub fn knob() -> Self {
        Self {
            mode: Condition::Knob,
            rate_gain: FULL_DEFLECTION_SPEED / std::f64::consts::FRAC_PI_2,
            deadzone: 0.02,
            screen_width: 1920.0,
        }
    }

    pub fn for_condition(condition: Condition) -> Self {
        match condition {
            Condition::Handheld => Self::handheld(),
            Condition::Knob => Self::knob(),
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * self.screen_width
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.rate_gain > 0.0) || !self.rate_gain.is_finite() {
            return invalid(format!("rate_gain must be > 0, got {}", self.rate_gain));
        }
        if !(self.deadzone >= 0.0) || !self.deadzone.is_finite() {
            return invalid(format!("deadzone must be >= 0, got {}", self.deadzone));
        }
        if !(self.screen_width > 0.0) || !self.screen_width.is_finite() {
            return invalid(format!("screen_width must be > 0, got {}", self.screen_width));
        }
        Ok(())
    }
}

pub fn dead_zone(deflection: f64, deadzone: f64) -> f64 {
    if deflection.abs() <= deadzone {
        0.0
    } else {
        deflection
    }
}

/// Advances the cursor by `dt` seconds. Positive deflection (upper trigger
/// in, or knob turned positive) moves right. A non-positive `dt` leaves the
/// cursor where it is.
pub fn map_input(cfg: &MappingConfig, deflection: f64, cursor: f64, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return cursor;
    }
    let moved = cursor + cfg.rate_gain * dead_zone(deflection, cfg.deadzone) * dt;
    moved.clamp(0.0, cfg.screen_width)
}
