use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{invalid, CharacterizationError};

/// Exponential sine sweep of torque, mNm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chirp {
    pub f0: f64,
    pub f1: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub sample_rate: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl Chirp {
    /// Sweep rate constant: f(t) = f0·exp(t / L).
    fn log_constant(&self) -> f64 {
        self.duration / (self.f1 / self.f0).ln()
    }

    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f0 * (t / self.log_constant()).exp()
    }

    pub fn phase(&self, t: f64) -> f64 {
        let l = self.log_constant();
        TAU * self.f0 * l * ((t / l).exp() - 1.0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn make_chirp(f0: f64, f1: f64, duration: f64, amplitude: f64, sample_rate: f64) -> Result<Chirp, CharacterizationError> {
    let vals = [f0, f1, duration, amplitude, sample_rate];
    if vals.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite chirp parameter");
    }
    if !(f0 > 0.0 && f0 < f1 && f1 < sample_rate / 2.0) {
        return invalid(format!("chirp needs 0 < f0 < f1 < rate/2, got f0={f0} f1={f1} rate={sample_rate}"));
    }
    if duration <= 0.0 {
        return invalid("chirp duration must be > 0");
    }
    let mut chirp = Chirp {
        f0,
        f1,
        duration,
        amplitude,
        sample_rate,
        samples: Vec::new(),
    };
    let n = (duration * sample_rate).round() as usize;
    chirp.samples = (0..n)
        .map(|i| amplitude * chirp.phase(i as f64 / sample_rate).sin())
        .collect();
    Ok(chirp)
}
