//! Builds the study report from a directory of session logs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use haptikit_core::controller::Condition;
use haptikit_core::stats::{build_report, format_report, ParticipantData, QuestionnaireEntry, StatsReport, TrackingCell};

use crate::log::{read_log, LogRecord, ParsedLog, TrialOutcome};
use crate::Error;

/// Reduces one session log to the per-participant values the report needs.
/// Only test-phase trials count; incomplete ones are left out with a warning.
pub fn participant_from_log(log: &ParsedLog) -> (ParticipantData, Vec<String>) {
    let id = log.config.plan.participant_id;
    let mut warnings = Vec::new();
    let mut tp: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    let mut incomplete: BTreeMap<Condition, usize> = BTreeMap::new();
    let mut tracking = Vec::new();
    for s in log.summaries().filter(|s| !s.training) {
        match &s.outcome {
            TrialOutcome::Targeting(trial) => match trial.throughput() {
                Some(v) if s.completed => tp.entry(s.condition).or_default().push(v),
                _ => *incomplete.entry(s.condition).or_default() += 1,
            },
            TrialOutcome::Tracking(seg) if s.completed => tracking.push(TrackingCell {
                condition: s.condition,
                frequency: seg.frequency,
                amplitude: seg.amplitude,
                mean_abs_error: seg.mean_abs_error,
            }),
            TrialOutcome::Tracking(_) => *incomplete.entry(s.condition).or_default() += 1,
        }
    }
    for (c, n) in incomplete {
        warnings.push(format!("participant {id}: {n} incomplete {c} test trial(s) left out"));
    }
    if !log.is_complete() {
        warnings.push(format!("participant {id}: session log has no session_end record"));
    }
    let questionnaires = log
        .records
        .iter()
        .filter_map(|(_, r)| match r {
            LogRecord::Questionnaire { task, condition, score, .. } => Some(QuestionnaireEntry {
                task: *task,
                condition: *condition,
                kind: score.kind,
                value: score.value,
            }),
            _ => None,
        })
        .collect();
    let throughput = tp
        .into_iter()
        .map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let data = ParticipantData {
        participant_id: id,
        throughput,
        tracking,
        questionnaires,
    };
    (data, warnings)
}

/// Every `*.jsonl` file under `dir`, sorted.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "jsonl") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn analyze_dir(dir: &Path) -> Result<StatsReport, Error> {
    let logs = find_logs(dir)?;
    if logs.is_empty() {
        return Err(Error::Session(format!("no session logs under {}", dir.display())));
    }
    let mut participants = Vec::new();
    let mut warnings = Vec::new();
    for path in logs {
        match read_log(&path) {
            Ok(log) => {
                let (p, w) = participant_from_log(&log);
                participants.push(p);
                warnings.extend(w);
            }
            Err(e) => warnings.push(format!("{}: skipped ({e})", path.display())),
        }
    }
    let mut report = build_report(&participants)?;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    Ok(report)
}

/// Writes `report.json` and `report.txt` and returns the text tables.
pub fn write_report(report: &StatsReport, out: &Path) -> Result<String, Error> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Log(e.to_string()))?;
    let json_path = out.join("report.json");
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    let text = format_report(report);
    let txt_path = out.join("report.txt");
    std::fs::write(&txt_path, &text).map_err(|e| Error::io(&txt_path, e))?;
    Ok(text)
}
