use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, HarnessError};

/// Fitts index of difficulty, bits.
pub fn id_bits(amplitude: f64, width: f64) -> f64 {
    (amplitude / width + 1.0).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// px
    pub amplitude: f64,
    /// px
    pub width: f64,
    /// Cursor position when the trial opens, px.
    pub start_pos: f64,
    /// +1 moves right, -1 left.
    pub direction: i8,
}

impl TargetSpec {
    pub fn target_center(&self) -> f64 {
        self.start_pos + f64::from(self.direction) * self.amplitude
    }

    pub fn contains(&self, cursor: f64) -> bool {
        (cursor - self.target_center()).abs() <= 0.5 * self.width
    }

    pub fn id_bits(&self) -> f64 {
        id_bits(self.amplitude, self.width)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.width > 0.0) || !(self.amplitude > 0.0) || !self.width.is_finite() || !self.amplitude.is_finite() {
            return invalid(format!("need A > 0 and W > 0, got A = {} W = {}", self.amplitude, self.width));
        }
        if self.direction != 1 && self.direction != -1 {
            return invalid(format!("direction must be +1 or -1, got {}", self.direction));
        }
        if !self.start_pos.is_finite() {
            return invalid("start position must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetingOptions {
    /// Uninterrupted time inside the target that completes a trial.
    pub dwell_ms: u64,
    /// Count the dwell as part of the movement time.
    pub include_dwell: bool,
    /// Trial gives up this long after it opens.
    pub timeout_ms: u64,
}

impl Default for TargetingOptions {
    fn default() -> Self {
        Self {
            dwell_ms: 2000,
            include_dwell: false,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetingPhase {
    /// Waiting for the start key; the cursor is held at the start position.
    Idle,
    Moving,
    Dwell,
    Completed,
    TimedOut,
}

impl TargetingPhase {
    pub fn is_done(self) -> bool {
        matches!(self, TargetingPhase::Completed | TargetingPhase::TimedOut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetingSample {
    pub t_ms: u64,
    /// px
    pub cursor: f64,
    pub key: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingTrial {
    pub amplitude_a: f64,
    pub width_w: f64,
    pub start_pos: f64,
    pub direction: i8,
    /// s; `None` unless completed.
    pub mt: Option<f64>,
    pub id_bits: f64,
    /// (t_ms, cursor px) for every processed sample.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<(u64, f64)>,
    pub completed: bool,
    /// Start key press, ms.
    pub t0_ms: Option<u64>,
    pub dwell_start_ms: Option<u64>,
    /// Last processed sample, ms.
    pub end_ms: Option<u64>,
}

impl TargetingTrial {
    pub fn throughput(&self) -> Option<f64> {
        self.mt.map(|mt| self.id_bits / mt)
    }
}

/// Idle until the start key goes down, then moving; a dwell begins on the
/// first in-target sample after the key press and any sample outside the
/// target cancels it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingMachine {
    pub spec: TargetSpec,
    pub options: TargetingOptions,
    pub phase: TargetingPhase,
    pub opened_ms: u64,
    t0: Option<u64>,
    dwell_start: Option<u64>,
    prev_key: bool,
    last_t: Option<u64>,
    record_path: bool,
    path: Vec<(u64, f64)>,
}

impl TargetingMachine {
    /// `key_held` is the key state just before the trial opens; a key still
    /// held from earlier must be released and pressed again.
    pub fn new(spec: TargetSpec, options: TargetingOptions, opened_ms: u64, key_held: bool) -> Result<Self, HarnessError> {
        spec.validate()?;
        if options.dwell_ms == 0 {
            return invalid("dwell must be at least 1 ms");
        }
        Ok(Self {
            spec,
            options,
            phase: TargetingPhase::Idle,
            opened_ms,
            t0: None,
            dwell_start: None,
            prev_key: key_held,
            last_t: None,
            record_path: true,
            path: Vec::new(),
        })
    }

    /// Skip keeping the per-sample path (long sessions).
    pub fn without_path(mut self) -> Self {
        self.record_path = false;
        self
    }

    pub fn t0(&self) -> Option<u64> {
        self.t0
    }

    pub fn dwell_start(&self) -> Option<u64> {
        self.dwell_start
    }

    /// Fraction of the dwell already served, for display.
    pub fn dwell_progress(&self, t_ms: u64) -> f64 {
        match self.dwell_start {
            Some(s) if self.phase == TargetingPhase::Dwell || self.phase == TargetingPhase::Completed => {
                ((t_ms.saturating_sub(s)) as f64 / self.options.dwell_ms as f64).min(1.0)
            }
            _ => 0.0,
        }
    }

    pub fn update(&mut self, sample: TargetingSample) -> Result<TargetingPhase, HarnessError> {
        if let Some(prev) = self.last_t {
            if sample.t_ms <= prev {
                return Err(HarnessError::NonMonotoneTime { prev, next: sample.t_ms });
            }
        }
        if self.phase.is_done() {
            return Ok(self.phase);
        }
        self.last_t = Some(sample.t_ms);
        if self.record_path {
            self.path.push((sample.t_ms, sample.cursor));
        }
        let t = sample.t_ms;
        let pressed = sample.key && !self.prev_key;
        self.prev_key = sample.key;

        match self.phase {
            TargetingPhase::Idle => {
                if pressed {
                    self.t0 = Some(t);
                    self.phase = TargetingPhase::Moving;
                }
            }
            TargetingPhase::Moving | TargetingPhase::Dwell => {
                if self.spec.contains(sample.cursor) {
                    let start = *self.dwell_start.get_or_insert(t);
                    self.phase = TargetingPhase::Dwell;
                    if t - start >= self.options.dwell_ms {
                        self.phase = TargetingPhase::Completed;
                        return Ok(self.phase);
                    }
                } else {
                    self.dwell_start = None;
                    self.phase = TargetingPhase::Moving;
                }
            }
            TargetingPhase::Completed | TargetingPhase::TimedOut => {}
        }
        if t.saturating_sub(self.opened_ms) >= self.options.timeout_ms {
            self.phase = TargetingPhase::TimedOut;
        }
        Ok(self.phase)
    }

    pub fn finish(self) -> TargetingTrial {
        let completed = self.phase == TargetingPhase::Completed;
        let mt = match (completed, self.t0, self.dwell_start, self.last_t) {
            (true, Some(t0), Some(dwell), Some(end)) => {
                let stop = if self.options.include_dwell { end } else { dwell };
                Some((stop - t0) as f64 / 1000.0)
            }
            _ => None,
        };
        TargetingTrial {
            amplitude_a: self.spec.amplitude,
            width_w: self.spec.width,
            start_pos: self.spec.start_pos,
            direction: self.spec.direction,
            mt,
            id_bits: self.spec.id_bits(),
            path: self.path,
            completed,
            t0_ms: self.t0,
            dwell_start_ms: if completed { self.dwell_start } else { None },
            end_ms: self.last_t,
        }
    }
}

/// Runs the state machine over a finished stream. A stream that ends early
/// yields an incomplete trial.
pub fn run_targeting_trial<I>(spec: TargetSpec, samples: I, options: &TargetingOptions) -> Result<TargetingTrial, HarnessError>
where
    I: IntoIterator<Item = TargetingSample>,
{
    let mut samples = samples.into_iter().peekable();
    let opened = samples.peek().map_or(0, |s| s.t_ms);
    let mut machine = TargetingMachine::new(spec, options.clone(), opened, false)?;
    for s in samples {
        if machine.update(s)?.is_done() {
            break;
        }
    }
    Ok(machine.finish())
}

/// Mean of per-trial ID/MT, bits/s.
pub fn throughput(trials: &[TargetingTrial]) -> Result<f64, HarnessError> {
    if trials.is_empty() {
        return Err(HarnessError::NoTrials);
    }
    let mut sum = 0.0;
    for (i, t) in trials.iter().enumerate() {
        match t.throughput() {
            Some(tp) if t.completed => sum += tp,
            _ => return Err(HarnessError::IncompleteTrial(i)),
        }
    }
    Ok(sum / trials.len() as f64)
}

/// Crossed amplitude × width × direction set, each start placed so the
/// movement is centered on the screen, repeated in shuffled passes until
/// `n` trials are drawn.
pub fn make_target_set(
    amplitudes: &[f64],
    widths: &[f64],
    n: usize,
    screen_width: f64,
    seed: u64,
) -> Result<Vec<TargetSpec>, HarnessError> {
    if amplitudes.is_empty() || widths.is_empty() {
        return invalid("need at least one amplitude and one width");
    }
    let center = 0.5 * screen_width;
    let mut cells = Vec::new();
    for &a in amplitudes {
        for &w in widths {
            for direction in [1i8, -1] {
                let spec = TargetSpec {
                    amplitude: a,
                    width: w,
                    start_pos: center - f64::from(direction) * a / 2.0,
                    direction,
                };
                spec.validate()?;
                let reach = a / 2.0 + w / 2.0;
                if reach > center {
                    return invalid(format!("A = {a}, W = {w} does not fit on a {screen_width} px screen"));
                }
                cells.push(spec);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut pass = cells.clone();
        pass.shuffle(&mut rng);
        let take = (n - out.len()).min(pass.len());
        out.extend_from_slice(&pass[..take]);
    }
    Ok(out)
}
