use serde::{Deserialize, Serialize};

use super::{invalid, HarnessError, MappingConfig};
use crate::controller::{Condition, ImpedanceConfig};
use crate::device::{DeviceParams, DeviceState};
use crate::rig::Rig;

/// Spring-damper between where the hand wants the grip to be and where it
/// is. Acts at the trigger (handheld) or at the grip radius (knob).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    /// N/mm
    pub stiffness: f64,
    /// N/(mm/s)
    pub damping: f64,
}

impl HandModel {
    /// Roughly critically damped against each device's inertia and overlay.
    pub fn for_condition(condition: Condition) -> Self {
        match condition {
            Condition::Handheld => Self { stiffness: 10.0, damping: 0.046 },
            Condition::Knob => Self { stiffness: 1.0, damping: 0.0065 },
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if !(self.stiffness >= 0.0 && self.damping >= 0.0) || !self.stiffness.is_finite() || !self.damping.is_finite() {
            return invalid("hand stiffness and damping must be finite and >= 0");
        }
        Ok(())
    }
}

/// One study station: device plus overlay, held by a hand, read through the
/// encoder into deflection units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Apparatus {
    pub condition: Condition,
    pub rig: Rig,
    pub hand: HandModel,
    pub mapping: MappingConfig,
}

impl Apparatus {
    pub fn new(
        condition: Condition,
        params: DeviceParams,
        overlay: ImpedanceConfig,
        mapping: MappingConfig,
        hand: HandModel,
    ) -> Result<Self, HarnessError> {
        mapping.validate()?;
        hand.validate()?;
        if mapping.mode != condition {
            return invalid(format!("mapping is for {} but the station is {}", mapping.mode, condition));
        }
        if (overlay.loop_rate - super::TICK_RATE).abs() > 1e-9 {
            return invalid("the study harness runs the overlay at 1000 Hz");
        }
        let center = overlay.center;
        let rig = Rig::new(params, overlay, DeviceState::at_rest(center))?;
        Ok(Self { condition, rig, hand, mapping })
    }

    /// Largest deflection the device can reach, in deflection units.
    pub fn full_scale(&self) -> f64 {
        let limit = self.rig.params.theta_limit();
        match self.condition {
            Condition::Handheld => self.rig.params.radius * limit,
            Condition::Knob => limit,
        }
    }

    fn to_angle(&self, deflection: f64) -> f64 {
        match self.condition {
            Condition::Handheld => deflection / self.rig.params.radius,
            Condition::Knob => deflection,
        }
    }

    fn to_deflection(&self, angle: f64) -> f64 {
        match self.condition {
            Condition::Handheld => angle * self.rig.params.radius,
            Condition::Knob => angle,
        }
    }

    /// Deflection as the encoder sees it.
    pub fn measured_deflection(&self) -> Result<f64, HarnessError> {
        let angle = self.rig.measured_angle().map_err(crate::rig::RigError::from)?;
        Ok(self.to_deflection(angle - self.rig.overlay.center))
    }

    /// One control period with the hand pulling toward `intended`
    /// (deflection units). Returns the measured deflection afterwards.
    pub fn step(&mut self, intended: f64) -> Result<f64, HarnessError> {
        if !intended.is_finite() {
            return invalid("intended deflection must be finite");
        }
        let r = self.rig.params.radius;
        let target_mm = r * (self.to_angle(intended) + self.rig.overlay.center);
        let HandModel { stiffness, damping } = self.hand;
        self.rig
            .tick_with(0.0, |s| stiffness * (target_mm - r * s.theta) - damping * r * s.omega)?;
        self.measured_deflection()
    }

    /// Device back at rest on the overlay center.
    pub fn reset(&mut self) {
        let center = self.rig.overlay.center;
        self.rig.reset(center);
    }
}
