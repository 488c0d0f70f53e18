//! Rigid single-inertia model of the coupled-trigger drivetrain.
//!
//! Units used throughout: torque in mNm, shaft angle in rad, trigger travel in
//! mm, force in N. Because the reduction radius is expressed in mm, a torque in
//! mNm divided by the radius is directly a force in newtons.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest plant step accepted by [`step`].
pub const MAX_DT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("time step {0} s outside (0, 0.001]")]
    BadTimeStep(f64),
    #[error("shaft angle {theta} rad outside travel ±{limit} rad")]
    OutOfTravel { theta: f64, limit: f64 },
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
}

/// Breakaway torque as a function of shaft angle.
///
/// A table of `(theta_rad, torque_mNm)` points over one shaft revolution,
/// linearly interpolated and extended periodically with period 2π. A single
/// point describes a constant profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct StictionProfile {
    points: Vec<(f64, f64)>,
}

impl StictionProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, DeviceError> {
        if points.is_empty() {
            return Err(DeviceError::InvalidParams("stiction profile is empty".into()));
        }
        for (i, &(theta, torque)) in points.iter().enumerate() {
            if !theta.is_finite() || !torque.is_finite() {
                return Err(DeviceError::NonFinite("stiction profile point"));
            }
            if !(0.0..TAU).contains(&theta) {
                return Err(DeviceError::InvalidParams(format!(
                    "stiction profile angle {theta} outside [0, 2π)"
                )));
            }
            if torque < 0.0 {
                return Err(DeviceError::InvalidParams(format!(
                    "negative breakaway torque {torque} at {theta} rad"
                )));
            }
            if i > 0 && theta <= points[i - 1].0 {
                return Err(DeviceError::InvalidParams(
                    "stiction profile angles must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn constant(torque: f64) -> Result<Self, DeviceError> {
        Self::new(vec![(0.0, torque)])
    }

    /// `mid + half_range * sin(theta + phase)` tabulated at `n` points.
    pub fn sinusoidal(min: f64, max: f64, phase: f64, n: usize) -> Result<Self, DeviceError> {
        if n == 0 || min > max {
            return Err(DeviceError::InvalidParams("bad sinusoidal stiction profile".into()));
        }
        let mid = 0.5 * (min + max);
        let half = 0.5 * (max - min);
        let points = (0..n)
            .map(|i| {
                let theta = TAU * i as f64 / n as f64;
                (theta, mid + half * (theta + phase).sin())
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Breakaway torque at `theta`, mNm.
    pub fn at(&self, theta: f64) -> f64 {
        let pts = &self.points;
        if pts.len() == 1 {
            return pts[0].1;
        }
        let wrapped = theta.rem_euclid(TAU);
        // Index of the first point strictly after `wrapped`.
        let upper = pts.partition_point(|&(t, _)| t <= wrapped);
        let (lo, hi) = if upper == 0 {
            let (t_last, v_last) = pts[pts.len() - 1];
            ((t_last - TAU, v_last), pts[0])
        } else if upper == pts.len() {
            let (t0, v0) = pts[0];
            (pts[pts.len() - 1], (t0 + TAU, v0))
        } else {
            (pts[upper - 1], pts[upper])
        };
        let frac = (wrapped - lo.0) / (hi.0 - lo.0);
        lo.1 + frac * (hi.1 - lo.1)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl TryFrom<Vec<(f64, f64)>> for StictionProfile {
    type Error = DeviceError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<StictionProfile> for Vec<(f64, f64)> {
    fn from(profile: StictionProfile) -> Self {
        profile.points
    }
}

/// Passive fingertip impedance acting at the upper trigger about mid-stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLoad {
    /// kg
    pub mass: f64,
    /// N/mm
    pub stiffness: f64,
    /// N/(mm/s)
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Rotor plus reflected drivetrain inertia, mNm/(rad/s²).
    #[serde(rename = "inertia_J")]
    pub inertia: f64,
    /// Cable-drive reduction radius, mm of trigger travel per shaft radian.
    #[serde(rename = "radius_r")]
    pub radius: f64,
    /// Rotational viscous damping, mNm/(rad/s).
    #[serde(rename = "viscous_b")]
    pub viscous: f64,
    pub stiction_profile: StictionProfile,
    /// Kinetic friction as a fraction of breakaway torque.
    pub coulomb_ratio: f64,
    /// Trigger travel, mm.
    pub stroke: f64,
    /// mNm
    pub torque_max_cont: f64,
    pub torque_peak_mult: f64,
    pub encoder_counts_per_turn: u32,
    #[serde(default)]
    pub user_load: Option<UserLoad>,
    /// Below this speed (rad/s) the shaft is treated as at rest for stiction.
    #[serde(default = "default_deadband")]
    pub velocity_deadband: f64,
}

fn default_deadband() -> f64 {
    1e-3
}

/// Viscous damping of the default device, mNm/(rad/s). Not measured on the
/// hardware; chosen so the default uncoupled stability sweep lands near the
/// reported 1.06 N/mm.
pub const DEFAULT_VISCOUS: f64 = 2.0e-3;

/// Phase of the default stiction sinusoid. Chosen so that sixteen positions
/// spread over 90% of the travel average to 0.665 mNm.
pub const DEFAULT_STICTION_PHASE: f64 = 0.53;

impl Default for DeviceParams {
    /// The handheld prototype: 32.3 mNm motor, 4096-count encoder, 15 mm
    /// stroke, 7.91e-4 mNm/(rad/s²) reflected inertia and a reduction radius
    /// of 0.665 mNm / 0.22 N = 3.02 mm.
    fn default() -> Self {
        Self {
            inertia: 7.91e-4,
            radius: 3.02,
            viscous: DEFAULT_VISCOUS,
            stiction_profile: StictionProfile::sinusoidal(0.177, 1.029, DEFAULT_STICTION_PHASE, 64)
                .expect("static profile"),
            coulomb_ratio: 0.8,
            stroke: 15.0,
            torque_max_cont: 32.3,
            torque_peak_mult: 1.5,
            encoder_counts_per_turn: 4096,
            user_load: None,
            velocity_deadband: default_deadband(),
        }
    }
}

impl DeviceParams {
    /// Grounded knob used as the comparison input. The knob hardware is only
    /// loosely described, so these values are nominal: a 10 mm grip radius and
    /// a quarter turn of travel either side of center.
    pub fn knob() -> Self {
        Self {
            inertia: 2.0e-3,
            radius: 10.0,
            viscous: DEFAULT_VISCOUS,
            stiction_profile: StictionProfile::constant(0.3).expect("static profile"),
            coulomb_ratio: 0.8,
            stroke: 10.0 * std::f64::consts::PI,
            torque_max_cont: 25.0,
            torque_peak_mult: 1.5,
            encoder_counts_per_turn: 4096,
            user_load: None,
            velocity_deadband: default_deadband(),
        }
    }

    /// Frictionless variant with only viscous damping `b`.
    pub fn linear(inertia: f64, viscous: f64) -> Self {
        Self {
            inertia,
            viscous,
            stiction_profile: StictionProfile::constant(0.0).expect("static profile"),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let finite = [
            self.inertia,
            self.radius,
            self.viscous,
            self.coulomb_ratio,
            self.stroke,
            self.torque_max_cont,
            self.torque_peak_mult,
            self.velocity_deadband,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(DeviceError::NonFinite("device parameter"));
        }
        let bad = |msg: &str| Err(DeviceError::InvalidParams(msg.to_string()));
        if self.inertia <= 0.0 {
            return bad("inertia_J must be > 0");
        }
        if self.radius <= 0.0 {
            return bad("radius_r must be > 0");
        }
        if self.stroke <= 0.0 {
            return bad("stroke must be > 0");
        }
        if self.viscous < 0.0 {
            return bad("viscous_b must be >= 0");
        }
        if !(self.coulomb_ratio > 0.0 && self.coulomb_ratio <= 1.0) {
            return bad("coulomb_ratio must be in (0, 1]");
        }
        if self.torque_max_cont <= 0.0 || self.torque_peak_mult < 1.0 {
            return bad("torque rating must be positive with peak multiplier >= 1");
        }
        if self.encoder_counts_per_turn == 0 {
            return bad("encoder_counts_per_turn must be >= 1");
        }
        if self.velocity_deadband < 0.0 {
            return bad("velocity_deadband must be >= 0");
        }
        if let Some(load) = &self.user_load {
            let vals = [load.mass, load.stiffness, load.damping];
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad("user_load terms must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Hard-stop angle: half the stroke expressed at the shaft.
    pub fn theta_limit(&self) -> f64 {
        0.5 * self.stroke / self.radius
    }

    pub fn peak_torque(&self) -> f64 {
        self.torque_max_cont * self.torque_peak_mult
    }

    pub fn encoder_quantum(&self) -> f64 {
        TAU / self.encoder_counts_per_turn as f64
    }

    /// Shaft inertia including any attached fingertip mass.
    pub fn effective_inertia(&self) -> f64 {
        // kg·mm² = 1e-3 mNm·s²
        let load = self.user_load.map_or(0.0, |l| l.mass * self.radius * self.radius * 1e-3);
        self.inertia + load
    }

    /// Rotational stiffness (mNm/rad) equivalent to a trigger-side stiffness in N/mm.
    pub fn rotational_stiffness(&self, trigger_stiffness: f64) -> f64 {
        trigger_stiffness * self.radius * self.radius
    }

    /// Trigger-side stiffness (N/mm) equivalent to a rotational stiffness in mNm/rad.
    pub fn trigger_stiffness(&self, rotational: f64) -> f64 {
        rotational / (self.radius * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub theta: f64,
    pub omega: f64,
    pub t: f64,
    pub sticking: bool,
    pub last_applied_torque: f64,
}

impl DeviceState {
    pub fn at_rest(theta: f64) -> Self {
        Self {
            theta,
            omega: 0.0,
            t: 0.0,
            sticking: true,
            last_applied_torque: 0.0,
        }
    }

    pub fn kinetic_energy(&self, params: &DeviceParams) -> f64 {
        0.5 * params.effective_inertia() * self.omega * self.omega
    }
}

/// Trigger positions, mm of travel from the fully-out position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerPose {
    pub x_upper: f64,
    pub x_lower: f64,
}

impl TriggerPose {
    /// Signed differential deflection, mm; positive when the upper trigger is in.
    pub fn deflection(&self) -> f64 {
        0.5 * (self.x_upper - self.x_lower)
    }
}

/// Advance the plant by one semi-implicit Euler step.
///
/// `motor_torque` is clipped to the amplifier peak; `user_force` acts on the
/// upper trigger, positive pushing it in.
pub fn step(
    params: &DeviceParams,
    state: &DeviceState,
    motor_torque: f64,
    user_force: f64,
    dt: f64,
) -> Result<DeviceState, DeviceError> {
    if !dt.is_finite() {
        return Err(DeviceError::NonFinite("dt"));
    }
    if dt <= 0.0 || dt > MAX_DT {
        return Err(DeviceError::BadTimeStep(dt));
    }
    if !motor_torque.is_finite() {
        return Err(DeviceError::NonFinite("motor torque"));
    }
    if !user_force.is_finite() {
        return Err(DeviceError::NonFinite("user force"));
    }
    if !state.theta.is_finite() || !state.omega.is_finite() {
        return Err(DeviceError::NonFinite("device state"));
    }

    let r = params.radius;
    let peak = params.peak_torque();
    let motor = motor_torque.clamp(-peak, peak);
    let mut applied = motor + user_force * r;
    if let Some(load) = &params.user_load {
        applied -= load.stiffness * r * r * state.theta + load.damping * r * r * state.omega;
    }
    let inertia = params.effective_inertia();
    let breakaway = params.stiction_profile.at(state.theta);
    let near_rest = state.sticking || state.omega.abs() < params.velocity_deadband;

    let mut next = DeviceState {
        t: state.t + dt,
        last_applied_torque: motor,
        ..*state
    };

    if near_rest && applied.abs() <= breakaway {
        next.omega = 0.0;
        next.sticking = true;
        return Ok(next);
    }

    let omega0 = if state.sticking { 0.0 } else { state.omega };
    let direction = if near_rest { applied.signum() } else { state.omega.signum() };
    let kinetic = params.coulomb_ratio * breakaway * direction;
    // Viscous term treated implicitly.
    let mut omega = (omega0 + dt * (applied - kinetic) / inertia) / (1.0 + dt * params.viscous / inertia);
    let mut sticking = false;
    if omega * direction < 0.0 {
        // Friction may stop the shaft but never reverse it within a step.
        omega = 0.0;
        sticking = true;
    }
    let mut theta = state.theta + dt * omega;

    let limit = params.theta_limit();
    if theta > limit {
        theta = limit;
        omega = omega.min(0.0);
    } else if theta < -limit {
        theta = -limit;
        omega = omega.max(0.0);
    }

    next.theta = theta;
    next.omega = omega;
    next.sticking = sticking;
    Ok(next)
}

pub fn shaft_to_triggers(params: &DeviceParams, theta: f64) -> Result<TriggerPose, DeviceError> {
    if !theta.is_finite() {
        return Err(DeviceError::NonFinite("theta"));
    }
    let limit = params.theta_limit();
    if theta.abs() > limit * (1.0 + 1e-12) {
        return Err(DeviceError::OutOfTravel { theta, limit });
    }
    let half = 0.5 * params.stroke;
    let offset = (params.radius * theta).clamp(-half, half);
    // Computing the longer side first makes the subtraction exact, so the two
    // positions always sum to the stroke.
    if offset >= 0.0 {
        let x_upper = half + offset;
        Ok(TriggerPose {
            x_upper,
            x_lower: params.stroke - x_upper,
        })
    } else {
        let x_lower = half - offset;
        Ok(TriggerPose {
            x_upper: params.stroke - x_lower,
            x_lower,
        })
    }
}

/// Shaft torque (mNm) seen as a force at the trigger (N).
pub fn reflect_torque_to_force(params: &DeviceParams, torque: f64) -> Result<f64, DeviceError> {
    if !torque.is_finite() {
        return Err(DeviceError::NonFinite("torque"));
    }
    Ok(torque / params.radius)
}

pub fn quantize_encoder(params: &DeviceParams, theta: f64) -> Result<i64, DeviceError> {
    if !theta.is_finite() {
        return Err(DeviceError::NonFinite("theta"));
    }
    Ok((theta * params.encoder_counts_per_turn as f64 / TAU).floor() as i64)
}

pub fn dequantize_encoder(counts: i64, counts_per_turn: u32) -> f64 {
    counts as f64 * TAU / counts_per_turn as f64
}
