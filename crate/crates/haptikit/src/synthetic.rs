//! Headless participant: drives a runner through the same sample and
//! control messages a UI client would send.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use haptikit_core::controller::Condition;
use haptikit_core::harness::{derive_seed, SyntheticOperator};
use haptikit_core::stats::QuestionnaireKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SessionConfig;
use crate::log::{JsonlWriter, LogSink};
use crate::runner::SessionRunner;
use crate::wire::{ControlMessage, Phase, SampleMessage, View};
use crate::Error;

/// Simulated time after which a headless session is abandoned, ms.
const SESSION_LIMIT_MS: u64 = 4 * 3600 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticRun {
    pub samples_sent: u64,
    /// Simulated session length, ms.
    pub duration_ms: u64,
}

/// Plausible questionnaire answers, fixed by the seed.
pub fn synthetic_responses(kind: QuestionnaireKind, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match kind {
        QuestionnaireKind::Tlx => (0..6).map(|_| f64::from(rng.random_range(2..15u32) * 5)).collect(),
        QuestionnaireKind::Sus => (0..10)
            .map(|i| f64::from(if i % 2 == 0 { rng.random_range(3..=5u32) } else { rng.random_range(1..=3u32) }))
            .collect(),
    }
}

/// Runs the whole session with the configured synthetic operator.
pub fn run_synthetic<S: LogSink>(runner: &mut SessionRunner<S>) -> Result<SyntheticRun, Error> {
    let config = runner.config().clone();
    // One operator per device for aiming and one for pursuit.
    let mut operators = BTreeMap::new();
    for c in Condition::ALL {
        let station = config.stations.get(c).build(c)?;
        let make = |cfg, label| {
            SyntheticOperator::new(
                cfg,
                station.mapping.rate_gain,
                station.full_scale(),
                derive_seed(config.seed, &[label, c.as_str()]),
            )
        };
        let aiming = make(config.operator.clone(), "operator")?;
        let pursuit = make(config.operator.for_tracking(), "operator-tracking")?;
        operators.insert(c, (aiming, pursuit));
    }
    let mut answers = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["questionnaire"]));
    let period = config.operator.sample_period_ms;

    let mut t = 0u64;
    let mut samples_sent = 0;
    let mut seen_trial = None;
    let mut opened_at = 0;
    while !runner.is_done() {
        if t > SESSION_LIMIT_MS {
            return Err(Error::Session(format!("synthetic session still running after {SESSION_LIMIT_MS} ms")));
        }
        let display = runner.current_display();
        match (&display.phase, &display.view) {
            (Phase::Ready, _) => {
                runner.control(&ControlMessage::StartTrial, None)?;
                continue;
            }
            (Phase::Questionnaire, View::Questionnaire { questionnaire, .. }) => {
                let items = synthetic_responses(*questionnaire, &mut answers);
                runner.control(&ControlMessage::QuestionnaireSubmit { kind: *questionnaire, items }, None)?;
                continue;
            }
            _ => {}
        }
        let Some(condition) = runner.active_condition() else { break };
        let (aiming, pursuit) = operators.get_mut(&condition).expect("operators per condition");
        let op = if matches!(display.view, View::Tracking { .. }) { pursuit } else { aiming };
        if display.trial_id != seen_trial {
            seen_trial = display.trial_id;
            opened_at = t;
            // Tracking segments run back to back; only targeting trials
            // start from a fresh look at the screen.
            if matches!(display.view, View::Target { .. }) {
                op.reset();
            }
        }
        let error = match display.view {
            View::Target { center, .. } => center - display.cursor_px,
            View::Tracking { ref_px } => ref_px - display.cursor_px,
            _ => 0.0,
        };
        let deflection = op.respond(error);
        let key = display.phase == Phase::Idle && op.key_down(t - opened_at);
        runner.ingest(&SampleMessage::new(t, deflection, condition, key))?;
        samples_sent += 1;
        t += period;
    }
    runner.finish()?;
    Ok(SyntheticRun { samples_sent, duration_ms: runner.now() })
}

/// Output paths of one headless session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionFiles {
    pub config: PathBuf,
    pub log: PathBuf,
}

/// Writes `session.config.json` and `session.log.jsonl` under `dir`.
pub fn simulate_to_dir(config: &SessionConfig, dir: &Path) -> Result<(SessionFiles, SyntheticRun), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SessionFiles {
        config: dir.join("session.config.json"),
        log: dir.join("session.log.jsonl"),
    };
    config.save(&files.config)?;
    let file = std::fs::File::create(&files.log).map_err(|e| Error::io(&files.log, e))?;
    let mut runner = SessionRunner::new(config.clone(), JsonlWriter::new(std::io::BufWriter::new(file)))?;
    let run = run_synthetic(&mut runner)?;
    Ok((files, run))
}
