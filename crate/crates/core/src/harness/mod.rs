//! Study harness: rate-control cursor mapping, Fitts targeting and sinusoid
//! tracking trials, session plans and a synthetic operator for headless runs.

mod apparatus;
mod mapping;
mod operator;
mod plan;
mod targeting;
mod tracking;

use thiserror::Error;

use crate::rig::RigError;

pub use apparatus::{Apparatus, HandModel};
pub use mapping::{dead_zone, map_input, MappingConfig};
pub use operator::{OperatorConfig, SyntheticOperator};
pub use plan::{derive_seed, SessionPlan, TargetingPlanConfig, Task, TrackingPlanConfig};
pub use targeting::{
    id_bits, make_target_set, run_targeting_trial, throughput, TargetSpec, TargetingMachine, TargetingOptions,
    TargetingPhase, TargetingSample, TargetingTrial,
};
pub use tracking::{make_tracking_plan, tracking_error, SegmentSpec, TrackingPlan, TrackingSegment};

/// Simulation grid of the harness, Hz. Timestamps are integer milliseconds.
pub const TICK_RATE: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("timestamps must increase: {next} ms after {prev} ms")]
    NonMonotoneTime { prev: u64, next: u64 },
    #[error("reference and cursor series differ in length ({reference} vs {cursor})")]
    GridMismatch { reference: usize, cursor: usize },
    #[error("throughput needs at least one trial")]
    NoTrials,
    #[error("trial {0} is incomplete")]
    IncompleteTrial(usize),
    #[error(transparent)]
    Rig(#[from] RigError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::InvalidArgument(msg.into()))
}
