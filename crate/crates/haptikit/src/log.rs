//! JSONL session log: one record per line, `type`-tagged.

use std::io::{BufRead, Write};
use std::path::Path;

use haptikit_core::controller::{Condition, ControllerState};
use haptikit_core::device::DeviceState;
use haptikit_core::harness::{SegmentSpec, TargetSpec, TargetingTrial, Task, TrackingSegment};
use haptikit_core::stats::QuestionnaireScore;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::wire::ControlMessage;
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// One accepted input sample: t_ms, deflection, buttons and the cursor (px)
/// the participant saw at that moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow(pub u64, pub f64, pub u8, pub f64);

impl SampleRow {
    pub fn t_ms(&self) -> u64 {
        self.0
    }

    pub fn deflection(&self) -> f64 {
        self.1
    }

    pub fn buttons(&self) -> u8 {
        self.2
    }

    pub fn cursor(&self) -> f64 {
        self.3
    }
}

/// Dynamic state when a trial opens. Parameters live in the header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub device: DeviceState,
    pub controller: ControllerState,
    pub cursor: f64,
    pub held_deflection: f64,
    pub held_buttons: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TrialSpec {
    Targeting(TargetSpec),
    Tracking(SegmentSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TrialOutcome {
    Targeting(TargetingTrial),
    Tracking(TrackingSegment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: u64,
    pub condition: Condition,
    pub training: bool,
    pub completed: bool,
    pub aborted: bool,
    pub end_ms: u64,
    pub outcome: TrialOutcome,
}

impl TrialSummary {
    pub fn task(&self) -> Task {
        match self.outcome {
            TrialOutcome::Targeting(_) => Task::Targeting,
            TrialOutcome::Tracking(_) => Task::Tracking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub samples_accepted: u64,
    pub stale_dropped: u64,
    pub unit_mismatch_dropped: u64,
    pub controls_applied: u64,
    pub controls_rejected: u64,
    pub trials_completed: u64,
    pub trials_incomplete: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        schema_version: u32,
        config: Box<SessionConfig>,
    },
    BlockStart {
        t_ms: u64,
        stage: usize,
        task: Task,
        condition: Condition,
    },
    TrialStart {
        t_ms: u64,
        trial_id: u64,
        condition: Condition,
        training: bool,
        spec: TrialSpec,
        state: Snapshot,
    },
    Samples {
        rows: Vec<SampleRow>,
    },
    Control {
        t_ms: u64,
        control: ControlMessage,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        applied: bool,
    },
    TrialSummary(TrialSummary),
    Questionnaire {
        t_ms: u64,
        task: Task,
        condition: Condition,
        score: QuestionnaireScore,
    },
    SessionEnd {
        t_ms: u64,
        counters: Counters,
    },
}

/// Destination for log records. Sample rows are batched and written ahead
/// of the next other record, so file order is processing order.
pub trait LogSink {
    fn record(&mut self, record: &LogRecord) -> Result<(), Error>;

    /// Called at trial boundaries.
    fn flush(&mut self) -> Result<(), Error> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl LogSink for NullSink {
    fn record(&mut self, _: &LogRecord) -> Result<(), Error> {
        Ok(())
    }
}

/// Keeps records in memory.
#[derive(Default)]
pub struct MemorySink(pub Vec<LogRecord>);

impl LogSink for MemorySink {
    fn record(&mut self, record: &LogRecord) -> Result<(), Error> {
        self.0.push(record.clone());
        Ok(())
    }
}

pub struct JsonlWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> LogSink for JsonlWriter<W> {
    fn record(&mut self, record: &LogRecord) -> Result<(), Error> {
        serde_json::to_writer(&mut self.out, record).map_err(|e| Error::Log(e.to_string()))?;
        self.out.write_all(b"\n").map_err(|e| Error::Log(e.to_string()))
    }

    fn flush(&mut self) -> Result<(), Error> {
        self.out.flush().map_err(|e| Error::Log(e.to_string()))
    }
}

/// A parsed log plus where parsing stopped, if it did.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub config: SessionConfig,
    /// Records after the header, with 1-based line numbers.
    pub records: Vec<(usize, LogRecord)>,
}

impl ParsedLog {
    pub fn summaries(&self) -> impl Iterator<Item = &TrialSummary> {
        self.records.iter().filter_map(|(_, r)| match r {
            LogRecord::TrialSummary(s) => Some(s),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.records.last(), Some((_, LogRecord::SessionEnd { .. })))
    }
}

fn describe(record: &LogRecord) -> String {
    match record {
        LogRecord::Header { .. } => "header".into(),
        LogRecord::BlockStart { stage, .. } => format!("block_start {stage}"),
        LogRecord::TrialStart { trial_id, .. } => format!("trial_start {trial_id}"),
        LogRecord::Samples { rows } => match rows.last() {
            Some(r) => format!("samples ending at {} ms", r.t_ms()),
            None => "empty samples batch".into(),
        },
        LogRecord::Control { t_ms, .. } => format!("control at {t_ms} ms"),
        LogRecord::TrialSummary(s) => format!("trial_summary {}", s.trial_id),
        LogRecord::Questionnaire { score, .. } => format!("questionnaire {}", score.kind),
        LogRecord::SessionEnd { .. } => "session_end".into(),
    }
}

/// Reads a whole log. Rejects unknown schema versions; a line that does not
/// parse stops reading with an error naming the last good record.
pub fn read_log(path: &Path) -> Result<ParsedLog, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(std::io::BufReader::new(file))
}

pub fn parse_log<R: BufRead>(reader: R) -> Result<ParsedLog, Error> {
    let mut config = None;
    let mut records = Vec::new();
    let mut last_good = String::from("none");
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Log(format!("line {line_no}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                if config.is_none() {
                    check_version(&line)?;
                }
                return Err(Error::CorruptLog {
                    line: line_no,
                    detail: e.to_string(),
                    last_valid: last_good,
                });
            }
        };
        last_good = format!("line {line_no}: {}", describe(&record));
        match (&config, record) {
            (None, LogRecord::Header { schema_version, config: c }) => {
                if schema_version != SCHEMA_VERSION {
                    return Err(Error::SchemaVersion(schema_version));
                }
                config = Some(*c);
            }
            (None, _) => {
                return Err(Error::CorruptLog {
                    line: line_no,
                    detail: "log does not start with a header".into(),
                    last_valid: "none".into(),
                })
            }
            (Some(_), LogRecord::Header { .. }) => {
                return Err(Error::CorruptLog {
                    line: line_no,
                    detail: "second header".into(),
                    last_valid: last_good,
                })
            }
            (Some(_), r) => records.push((line_no, r)),
        }
    }
    let config = config.ok_or_else(|| Error::CorruptLog {
        line: 0,
        detail: "empty log".into(),
        last_valid: "none".into(),
    })?;
    Ok(ParsedLog { config, records })
}

/// A header from a newer or older writer may not parse as ours at all;
/// report the version rather than a parse error when one is readable.
fn check_version(line: &str) -> Result<(), Error> {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(_) => return Ok(()),
    };
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v != u64::from(SCHEMA_VERSION) => Err(Error::SchemaVersion(v as u32)),
        _ => Ok(()),
    }
}
