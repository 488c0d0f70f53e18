//! Plant and impedance loop wired together on a fixed control grid.
//!
//! The controller runs once per control period and holds its torque for the
//! whole period; the plant is integrated with several sub-steps inside it so
//! that the sampled-data character of the loop is preserved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{control_step, ControlError, ControllerState, EncoderReading, ImpedanceConfig};
use crate::device::{quantize_encoder, step, DeviceError, DeviceParams, DeviceState};

/// Target plant step inside one control period, s.
pub const PLANT_DT: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    /// Encoder reading the controller acted on.
    pub counts: i64,
    /// Reading after the tick.
    pub counts_after: i64,
    pub controller_torque: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub params: DeviceParams,
    pub overlay: ImpedanceConfig,
    pub device: DeviceState,
    pub controller: ControllerState,
    substeps: u32,
}

impl Rig {
    pub fn new(params: DeviceParams, overlay: ImpedanceConfig, device: DeviceState) -> Result<Self, RigError> {
        params.validate()?;
        overlay.validate()?;
        let substeps = (overlay.period() / PLANT_DT - 1e-9).ceil().max(1.0) as u32;
        let rig = Self {
            params,
            overlay,
            device,
            controller: ControllerState::default(),
            substeps,
        };
        if rig.plant_dt() > crate::device::MAX_DT {
            return Err(DeviceError::BadTimeStep(rig.plant_dt()).into());
        }
        Ok(rig)
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn plant_dt(&self) -> f64 {
        self.overlay.period() / self.substeps as f64
    }

    pub fn counts(&self) -> Result<i64, DeviceError> {
        quantize_encoder(&self.params, self.device.theta)
    }

    pub fn reading(&self) -> Result<EncoderReading, DeviceError> {
        Ok(EncoderReading {
            counts: self.counts()?,
            counts_per_turn: self.params.encoder_counts_per_turn,
        })
    }

    /// Measured (dequantized) shaft angle.
    pub fn measured_angle(&self) -> Result<f64, DeviceError> {
        Ok(self.reading()?.angle())
    }

    /// One control period with an extra torque added after the controller's
    /// saturation and a user force evaluated at every plant sub-step.
    pub fn tick_with<F>(&mut self, extra_torque: f64, mut user_force: F) -> Result<TickOutput, RigError>
    where
        F: FnMut(&DeviceState) -> f64,
    {
        let reading = self.reading()?;
        let (torque, controller) = control_step(&self.overlay, reading, &self.controller);
        self.controller = controller;
        let command = torque + extra_torque;
        let dt = self.plant_dt();
        for _ in 0..self.substeps {
            let force = user_force(&self.device);
            self.device = step(&self.params, &self.device, command, force, dt)?;
        }
        Ok(TickOutput {
            counts: reading.counts,
            counts_after: self.counts()?,
            controller_torque: torque,
            saturated: controller.saturated,
        })
    }

    pub fn tick(&mut self, extra_torque: f64) -> Result<TickOutput, RigError> {
        self.tick_with(extra_torque, |_| 0.0)
    }

    /// Puts the shaft at rest at `theta` and clears the controller history.
    pub fn reset(&mut self, theta: f64) {
        self.device = DeviceState::at_rest(theta);
        self.controller = ControllerState::default();
    }
}
