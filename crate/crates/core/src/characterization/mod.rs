//! Bench experiments run against the simulated device: uncoupled stability
//! sweep, breakaway friction ramp and chirp frequency response.

mod chirp;
mod friction;
mod frf;
mod spectral;
mod stability;

use thiserror::Error;

use crate::device::DeviceError;
use crate::rig::RigError;

pub use chirp::{make_chirp, Chirp};
pub use friction::{default_positions, friction_test, FrictionOptions, FrictionSample, FrictionTestResult};
pub use frf::{measure_frf, FrfOptions, FrfResult};
pub use spectral::{welch, SpectralEstimate};
pub use stability::{stability_sweep, StabilityOptions, StabilityStep, StabilitySweepResult, StabilityVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharacterizationError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Rig(#[from] RigError),
}

impl From<DeviceError> for CharacterizationError {
    fn from(e: DeviceError) -> Self {
        CharacterizationError::Rig(e.into())
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CharacterizationError> {
    Err(CharacterizationError::InvalidArgument(msg.into()))
}
