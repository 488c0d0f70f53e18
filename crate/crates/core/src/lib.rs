//! Simulation core for a one-degree-of-freedom haptic trigger: plant model,
//! impedance loop, bench characterization, study harness and statistics.
//!
//! Units throughout: torque in mNm, angle in rad, travel in mm, force in N,
//! time in s unless a field name says otherwise.

pub mod characterization;
pub mod controller;
pub mod device;
pub mod harness;
pub mod rig;
pub mod stats;
