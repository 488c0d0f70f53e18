//! Recomputes a session from its logged samples and controls and checks
//! every derived record against the log.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::log::{read_log, LogRecord, MemorySink, ParsedLog, Snapshot, TrialSummary};
use crate::runner::SessionRunner;
use crate::wire::{Deflection, SampleMessage};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub trial_id: Option<u64>,
    pub line: Option<usize>,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub samples_checked: usize,
    pub trials_checked: usize,
    pub mismatches: Vec<Mismatch>,
    /// Log ends with a session_end record.
    pub complete: bool,
    pub recomputed: Vec<TrialSummary>,
}

impl ReplayReport {
    pub fn flagged_trials(&self) -> BTreeSet<u64> {
        self.mismatches.iter().filter_map(|m| m.trial_id).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn replay_log(path: &Path) -> Result<ReplayReport, Error> {
    replay_parsed(&read_log(path)?)
}

/// Key under which a derived record is compared, and the trial it belongs to.
fn derived_key(record: &LogRecord) -> Option<(String, Option<u64>)> {
    match record {
        LogRecord::BlockStart { stage, .. } => Some((format!("block {stage}"), None)),
        // The start state of a trial is whatever the trial before it left
        // behind, so a difference there belongs to that earlier trial.
        LogRecord::TrialStart { trial_id, .. } => {
            Some((format!("trial_start {trial_id}"), Some(trial_id.saturating_sub(1))))
        }
        LogRecord::TrialSummary(s) => Some((format!("trial_summary {}", s.trial_id), Some(s.trial_id))),
        LogRecord::Questionnaire { task, condition, score, .. } => {
            Some((format!("questionnaire {task}/{condition}/{}", score.kind), None))
        }
        LogRecord::SessionEnd { .. } => Some(("session_end".into(), None)),
        LogRecord::Header { .. } | LogRecord::Samples { .. } | LogRecord::Control { .. } => None,
    }
}

pub fn replay_parsed(log: &ParsedLog) -> Result<ReplayReport, Error> {
    // Each trial restarts from its logged state, so a bad sample is pinned
    // to the trial that contains it.
    let restore: BTreeMap<u64, (u64, Snapshot)> = log
        .records
        .iter()
        .filter_map(|(_, r)| match r {
            LogRecord::TrialStart { t_ms, trial_id, state, .. } => Some((*trial_id, (*t_ms, *state))),
            _ => None,
        })
        .collect();
    let mut runner = SessionRunner::new(log.config.clone(), MemorySink::default())?
        .with_restore_points(restore)
        .without_display();
    let mut mismatches = Vec::new();
    let mut samples_checked = 0;
    // Samples between trials are charged to the trial before them.
    let mut last_trial = None;

    for (line, record) in &log.records {
        match record {
            LogRecord::Samples { rows } => {
                for row in rows {
                    let unit = runner
                        .active_condition()
                        .map_or("", |c| c.deflection_unit())
                        .to_string();
                    let sample = SampleMessage {
                        t_ms: row.t_ms(),
                        deflection: Deflection { value: row.deflection(), unit },
                        buttons: row.buttons(),
                    };
                    let got = runner.ingest(&sample)?;
                    samples_checked += 1;
                    let trial_id = got.trial_id.or(last_trial);
                    last_trial = trial_id;
                    match got.row {
                        None => mismatches.push(Mismatch {
                            trial_id,
                            line: Some(*line),
                            what: format!("sample at {} ms rejected on replay", row.t_ms()),
                        }),
                        Some(r) if r.cursor().to_bits() != row.cursor().to_bits() => mismatches.push(Mismatch {
                            trial_id,
                            line: Some(*line),
                            what: format!(
                                "cursor at {} ms: logged {}, recomputed {}",
                                row.t_ms(),
                                row.cursor(),
                                r.cursor()
                            ),
                        }),
                        Some(_) => {}
                    }
                }
            }
            LogRecord::Control { control, reason, .. } => {
                runner.control(control, reason.as_deref())?;
            }
            _ => {}
        }
    }
    runner.finish()?;

    let mut logged: BTreeMap<String, (usize, Option<u64>, String)> = BTreeMap::new();
    for (line, record) in &log.records {
        if let Some((key, trial)) = derived_key(record) {
            let text = serde_json::to_string(record).map_err(|e| Error::Log(e.to_string()))?;
            logged.insert(key, (*line, trial, text));
        }
    }
    let recomputed_records = runner.into_sink().0;
    let mut recomputed = Vec::new();
    let mut seen = BTreeSet::new();
    for record in &recomputed_records {
        if let LogRecord::TrialSummary(s) = record {
            recomputed.push(s.clone());
        }
        let Some((key, trial)) = derived_key(record) else { continue };
        let text = serde_json::to_string(record).map_err(|e| Error::Log(e.to_string()))?;
        match logged.get(&key) {
            Some((line, _, logged_text)) if *logged_text != text => mismatches.push(Mismatch {
                trial_id: trial,
                line: Some(*line),
                what: format!("{key} differs from the recomputed record"),
            }),
            Some(_) => {}
            None if log.is_complete() => mismatches.push(Mismatch {
                trial_id: trial,
                line: None,
                what: format!("{key} is missing from the log"),
            }),
            // A log cut short by a crash is missing its tail; only the
            // records it does hold are checked.
            None => {}
        }
        seen.insert(key);
    }
    for (key, (line, trial, _)) in &logged {
        if !seen.contains(key) {
            mismatches.push(Mismatch {
                trial_id: *trial,
                line: Some(*line),
                what: format!("{key} is not produced on replay"),
            });
        }
    }
    let trials_checked = log.summaries().count();
    Ok(ReplayReport {
        samples_checked,
        trials_checked,
        mismatches,
        complete: log.is_complete(),
        recomputed,
    })
}
