use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{invalid, HarnessError};

/// Delayed proportional controller standing in for a participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    /// Perception-to-action delay, s.
    pub delay: f64,
    /// Commanded cursor speed per px of error while aiming at a target, 1/s.
    pub gain: f64,
    /// Same for following a moving reference. People tighten their loop
    /// for continuous pursuit, so this runs higher than `gain`.
    pub tracking_gain: f64,
    /// Motor noise as a fraction of full-scale deflection (clamped at ±3 sd).
    pub noise_sd: f64,
    /// Interval between input samples, ms.
    pub sample_period_ms: u64,
    /// Time from trial open to the start-key press, ms.
    pub reaction_ms: u64,
    /// How long the start key stays down, ms.
    pub key_hold_ms: u64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            delay: 0.2,
            gain: 1.5,
            tracking_gain: 4.0,
            noise_sd: 0.005,
            sample_period_ms: 4,
            reaction_ms: 300,
            key_hold_ms: 100,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return invalid("operator delay must be >= 0");
        }
        if !(self.gain >= 0.0) || !self.gain.is_finite() {
            return invalid("operator gain must be >= 0");
        }
        if !(self.tracking_gain >= 0.0) || !self.tracking_gain.is_finite() {
            return invalid("operator tracking gain must be >= 0");
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return invalid("operator noise must be >= 0");
        }
        if self.sample_period_ms == 0 {
            return invalid("operator sample period must be >= 1 ms");
        }
        Ok(())
    }

    /// This config with the tracking gain in place of the targeting one.
    pub fn for_tracking(&self) -> Self {
        Self { gain: self.tracking_gain, ..self.clone() }
    }

    pub fn delay_samples(&self) -> usize {
        (self.delay * 1000.0 / self.sample_period_ms as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOperator {
    config: OperatorConfig,
    rate_gain: f64,
    full_scale: f64,
    history: VecDeque<f64>,
    delay_samples: usize,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SyntheticOperator {
    /// `rate_gain` and `full_scale` come from the station the operator holds.
    pub fn new(config: OperatorConfig, rate_gain: f64, full_scale: f64, seed: u64) -> Result<Self, HarnessError> {
        config.validate()?;
        if !(rate_gain > 0.0) || !(full_scale > 0.0) {
            return invalid("rate gain and full scale must be > 0");
        }
        let sd = config.noise_sd * full_scale;
        let noise = if sd > 0.0 {
            Some(Normal::new(0.0, sd).map_err(|e| HarnessError::InvalidArgument(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            delay_samples: config.delay_samples(),
            config,
            rate_gain,
            full_scale,
            history: VecDeque::new(),
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    /// Forget what was seen so far; until a full delay has elapsed the
    /// operator acts on zero error.
    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Observes the current error (target or reference minus cursor, px) and
    /// returns the intended deflection for this sample.
    pub fn respond(&mut self, error_px: f64) -> f64 {
        self.history.push_back(error_px);
        while self.history.len() > self.delay_samples + 1 {
            self.history.pop_front();
        }
        let delayed = if self.history.len() == self.delay_samples + 1 {
            self.history[0]
        } else {
            0.0
        };
        let mut deflection = self.config.gain * delayed / self.rate_gain;
        if let Some(noise) = &self.noise {
            let sd = noise.std_dev();
            deflection += noise.sample(&mut self.rng).clamp(-3.0 * sd, 3.0 * sd);
        }
        deflection.clamp(-self.full_scale, self.full_scale)
    }

    /// Start-key state `since_open_ms` after a trial opened.
    pub fn key_down(&self, since_open_ms: u64) -> bool {
        since_open_ms >= self.config.reaction_ms && since_open_ms < self.config.reaction_ms + self.config.key_hold_ms
    }
}
