use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, HarnessError, TICK_RATE};

/// One sinusoid of the tracking reference, in px relative to screen center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// Hz
    pub frequency: f64,
    /// px
    pub amplitude: f64,
    pub periods: u32,
}

impl SegmentSpec {
    /// s
    pub fn duration(&self) -> f64 {
        f64::from(self.periods) / self.frequency
    }

    /// Samples on the 1 kHz grid; the sample after the last one would land
    /// back on zero.
    pub fn sample_count(&self) -> usize {
        (self.duration() * TICK_RATE).round() as usize
    }

    /// Offset from center at sample `i`.
    pub fn reference_at(&self, i: usize) -> f64 {
        self.amplitude * (TAU * self.frequency * i as f64 / TICK_RATE).sin()
    }

    pub fn reference(&self) -> Vec<f64> {
        (0..self.sample_count()).map(|i| self.reference_at(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingPlan {
    pub training: Vec<SegmentSpec>,
    pub test: Vec<SegmentSpec>,
}

/// Every (amplitude, frequency) pair once in the test plan and four times in
/// training, in seeded orders. The lower frequency runs for 4 periods and
/// the higher for 8. The test order never repeats the order in which the
/// pairs first show up in training.
pub fn make_tracking_plan(amps: [f64; 2], freqs: [f64; 2], seed: u64) -> Result<TrackingPlan, HarnessError> {
    if amps.iter().any(|a| !(*a > 0.0) || !a.is_finite()) || amps[0] == amps[1] {
        return invalid(format!("tracking amplitudes must be distinct and positive, got {amps:?}"));
    }
    if freqs.iter().any(|f| !(*f > 0.0) || *f >= TICK_RATE / 2.0) || freqs[0] == freqs[1] {
        return invalid(format!("tracking frequencies must be distinct and in (0, 500) Hz, got {freqs:?}"));
    }
    let low = freqs[0].min(freqs[1]);
    let mut cells = Vec::with_capacity(4);
    for &frequency in &freqs {
        for &amplitude in &amps {
            cells.push(SegmentSpec {
                frequency,
                amplitude,
                periods: if frequency == low { 4 } else { 8 },
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut training = Vec::with_capacity(16);
    for _ in 0..4 {
        training.extend_from_slice(&cells);
    }
    training.shuffle(&mut rng);

    let mut first_seen: Vec<SegmentSpec> = Vec::with_capacity(4);
    for s in &training {
        if !first_seen.contains(s) {
            first_seen.push(*s);
        }
    }
    let mut test = cells;
    loop {
        test.shuffle(&mut rng);
        if test != first_seen {
            break;
        }
    }
    Ok(TrackingPlan { training, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSegment {
    pub frequency: f64,
    pub amplitude: f64,
    pub periods: u32,
    /// px, same frame as the cursor
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ref_series: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cursor_series: Vec<f64>,
    pub mean_abs_error: f64,
}

impl TrackingSegment {
    pub fn new(spec: SegmentSpec, ref_series: Vec<f64>, cursor_series: Vec<f64>) -> Result<Self, HarnessError> {
        let mean_abs_error = tracking_error(&ref_series, &cursor_series)?;
        Ok(Self {
            frequency: spec.frequency,
            amplitude: spec.amplitude,
            periods: spec.periods,
            ref_series,
            cursor_series,
            mean_abs_error,
        })
    }
}

/// Mean absolute difference between two series on the same time grid, px.
pub fn tracking_error(reference: &[f64], cursor: &[f64]) -> Result<f64, HarnessError> {
    if reference.len() != cursor.len() {
        return Err(HarnessError::GridMismatch {
            reference: reference.len(),
            cursor: cursor.len(),
        });
    }
    if reference.is_empty() {
        return invalid("empty tracking series");
    }
    let sum: f64 = reference.iter().zip(cursor).map(|(r, c)| (r - c).abs()).sum();
    Ok(sum / reference.len() as f64)
}
