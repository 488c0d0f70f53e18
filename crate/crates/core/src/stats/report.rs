use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::anova::{rm_anova_2x2x2, AnovaTable, CellIndex};
use super::paired::{paired_t, sd, PairedTestResult};
use super::questionnaire::QuestionnaireKind;
use super::StatsError;
use crate::controller::Condition;
use crate::harness::Task;

/// Per-participant inputs to the report, already reduced from session logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantData {
    pub participant_id: u32,
    /// Mean targeting throughput per condition, bits/s.
    pub throughput: BTreeMap<Condition, f64>,
    /// Test-phase tracking segments. Repeats of a cell are averaged.
    pub tracking: Vec<TrackingCell>,
    pub questionnaires: Vec<QuestionnaireEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingCell {
    pub condition: Condition,
    /// Hz
    pub frequency: f64,
    /// px
    pub amplitude: f64,
    /// px
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireEntry {
    pub task: Task,
    pub condition: Condition,
    pub kind: QuestionnaireKind,
    /// 0–100
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// A paired test, or the reason it could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PairedTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TestOutcome {
    fn from(r: Result<PairedTestResult, StatsError>) -> Self {
        match r {
            Ok(res) => Self { result: Some(res), error: None },
            Err(e) => Self { result: None, error: Some(e.to_string()) },
        }
    }
}

/// One tracking segment type, errors per device. Four of these make up the
/// segment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub frequency: f64,
    pub amplitude: f64,
    pub handheld: ConditionSummary,
    pub knob: ConditionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireRow {
    pub task: Task,
    pub kind: QuestionnaireKind,
    pub handheld: ConditionSummary,
    pub knob: ConditionSummary,
    pub test: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    /// Participants with complete throughput and tracking data.
    pub participants: Vec<u32>,
    pub n: usize,
    pub excluded: Vec<(u32, String)>,
    pub throughput: Vec<ConditionSummary>,
    /// x = handheld, y = knob.
    pub throughput_test: TestOutcome,
    pub segments: Vec<SegmentRow>,
    pub anova: Option<AnovaTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anova_error: Option<String>,
    pub questionnaires: Vec<QuestionnaireRow>,
    pub warnings: Vec<String>,
}

const DEVICES: [Condition; 2] = [Condition::Handheld, Condition::Knob];

fn summarize(condition: Condition, v: &[f64]) -> ConditionSummary {
    let n = v.len();
    let mean = if n == 0 { f64::NAN } else { v.iter().sum::<f64>() / n as f64 };
    ConditionSummary {
        condition,
        mean,
        sd: if n < 2 { f64::NAN } else { sd(v) },
        n,
    }
}

fn two_levels(mut v: Vec<f64>, what: &str) -> Result<[f64; 2], StatsError> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    match v[..] {
        [lo, hi] => Ok([lo, hi]),
        _ => Err(StatsError::OutOfRange(format!("tracking needs exactly 2 {what} levels, found {v:?}"))),
    }
}

fn level(levels: &[f64; 2], v: f64) -> usize {
    usize::from(v == levels[1])
}

/// Builds every table of the study report. Participants missing a
/// throughput condition or a tracking cell are excluded and listed.
pub fn build_report(data: &[ParticipantData]) -> Result<StatsReport, StatsError> {
    let mut warnings = Vec::new();
    let mut excluded = Vec::new();

    let all_tracking: Vec<&TrackingCell> = data.iter().flat_map(|p| &p.tracking).collect();
    let (freqs, amps) = if all_tracking.is_empty() {
        (None, None)
    } else {
        (
            Some(two_levels(all_tracking.iter().map(|c| c.frequency).collect(), "frequency")?),
            Some(two_levels(all_tracking.iter().map(|c| c.amplitude).collect(), "amplitude")?),
        )
    };

    let mut used: Vec<(&ParticipantData, [f64; 8])> = Vec::new();
    for p in data {
        if let Some(c) = DEVICES.iter().find(|c| !p.throughput.get(c).is_some_and(|v| v.is_finite())) {
            excluded.push((p.participant_id, format!("no {c} throughput")));
            continue;
        }
        let (Some(freqs), Some(amps)) = (freqs, amps) else {
            excluded.push((p.participant_id, "no tracking data".to_string()));
            continue;
        };
        let mut sums = [0.0; 8];
        let mut counts = [0usize; 8];
        for c in &p.tracking {
            let idx = CellIndex {
                device: usize::from(c.condition == Condition::Knob),
                frequency: level(&freqs, c.frequency),
                amplitude: level(&amps, c.amplitude),
            }
            .index();
            sums[idx] += c.mean_abs_error;
            counts[idx] += 1;
        }
        if let Some(missing) = counts.iter().position(|&n| n == 0) {
            let cell = CellIndex::from_index(missing);
            excluded.push((
                p.participant_id,
                format!(
                    "no tracking segment for {} at {} Hz, {} px",
                    DEVICES[cell.device], freqs[cell.frequency], amps[cell.amplitude]
                ),
            ));
            continue;
        }
        let mut cells = [0.0; 8];
        for i in 0..8 {
            cells[i] = sums[i] / counts[i] as f64;
        }
        used.push((p, cells));
    }
    for (id, why) in &excluded {
        warnings.push(format!("participant {id} excluded: {why}"));
    }
    if used.len() < 2 {
        return Err(StatsError::TooFewParticipants(used.len()));
    }
    let (freqs, amps) = (freqs.unwrap_or_default(), amps.unwrap_or_default());

    let tp: Vec<Vec<f64>> = DEVICES
        .iter()
        .map(|c| used.iter().map(|(p, _)| p.throughput[c]).collect())
        .collect();
    let throughput: Vec<ConditionSummary> = DEVICES.iter().zip(&tp).map(|(&c, v)| summarize(c, v)).collect();
    for s in &throughput {
        if s.sd == 0.0 {
            warnings.push(format!("{} throughput has zero SD", s.condition));
        }
    }
    let throughput_test = TestOutcome::from(paired_t(&tp[0], &tp[1]));

    let mut segments = Vec::with_capacity(4);
    for (fi, &frequency) in freqs.iter().enumerate() {
        for (ai, &amplitude) in amps.iter().enumerate() {
            let col = |device: usize| -> Vec<f64> {
                let idx = CellIndex { device, frequency: fi, amplitude: ai }.index();
                used.iter().map(|(_, cells)| cells[idx]).collect()
            };
            segments.push(SegmentRow {
                frequency,
                amplitude,
                handheld: summarize(Condition::Handheld, &col(0)),
                knob: summarize(Condition::Knob, &col(1)),
            });
        }
    }

    let cells: Vec<[f64; 8]> = used.iter().map(|(_, c)| *c).collect();
    let (anova, anova_error) = match rm_anova_2x2x2(&cells) {
        Ok(t) => {
            for r in t.rows.iter().filter(|r| r.degenerate) {
                warnings.push(format!("ANOVA {}: error term is zero", r.effect));
            }
            (Some(t), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };

    let mut questionnaires = Vec::new();
    for task in [Task::Targeting, Task::Tracking] {
        for kind in [QuestionnaireKind::Tlx, QuestionnaireKind::Sus] {
            let score = |p: &ParticipantData, c: Condition| -> Option<f64> {
                let v: Vec<f64> = p
                    .questionnaires
                    .iter()
                    .filter(|q| q.task == task && q.kind == kind && q.condition == c)
                    .map(|q| q.value)
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut missing = Vec::new();
            for (p, _) in &used {
                match (score(p, Condition::Handheld), score(p, Condition::Knob)) {
                    (Some(a), Some(b)) => {
                        x.push(a);
                        y.push(b);
                    }
                    _ => missing.push(p.participant_id),
                }
            }
            if x.is_empty() {
                continue;
            }
            if !missing.is_empty() {
                warnings.push(format!("{task} {kind}: no paired responses from participants {missing:?}"));
            }
            questionnaires.push(QuestionnaireRow {
                task,
                kind,
                handheld: summarize(Condition::Handheld, &x),
                knob: summarize(Condition::Knob, &y),
                test: TestOutcome::from(paired_t(&x, &y)),
            });
        }
    }

    Ok(StatsReport {
        participants: used.iter().map(|(p, _)| p.participant_id).collect(),
        n: used.len(),
        excluded,
        throughput,
        throughput_test,
        segments,
        anova,
        anova_error,
        questionnaires,
        warnings,
    })
}

fn fmt_test(t: &TestOutcome) -> String {
    match (&t.result, &t.error) {
        (Some(r), _) => format!("t({}) = {:.3}, p = {:.4}, d = {:.3}", r.df, r.t, r.p, r.cohens_d),
        (None, Some(e)) => format!("not run: {e}"),
        (None, None) => "not run".to_string(),
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.prec$}"))
}

/// Plain-text rendering of the report tables.
pub fn format_report(r: &StatsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "participants analyzed: n = {} {:?}", r.n, r.participants);
    for (id, why) in &r.excluded {
        let _ = writeln!(s, "  excluded {id}: {why}");
    }

    let _ = writeln!(s, "\nThroughput (bits/s)");
    let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>4}", "device", "mean", "sd", "n");
    for c in &r.throughput {
        let _ = writeln!(s, "{:<10} {:>8.3} {:>8.3} {:>4}", c.condition.as_str(), c.mean, c.sd, c.n);
    }
    let _ = writeln!(s, "paired t: {}", fmt_test(&r.throughput_test));

    let _ = writeln!(s, "\nAverage tracking error per segment (px)");
    let _ = writeln!(s, "{:<22} {:>16} {:>16}", "segment", "handheld", "knob");
    for row in &r.segments {
        let label = format!("{} Hz, {} px", row.frequency, row.amplitude);
        let cell = |c: &ConditionSummary| format!("{:.2} ({:.2})", c.mean, c.sd);
        let _ = writeln!(s, "{:<22} {:>16} {:>16}", label, cell(&row.handheld), cell(&row.knob));
    }

    let _ = writeln!(s, "\nThree-way repeated-measures ANOVA on tracking error");
    match (&r.anova, &r.anova_error) {
        (Some(t), _) => {
            let _ = writeln!(s, "{:<32} {:>10} {:>6} {:>6} {:>10}", "effect", "F", "num", "den", "p");
            for row in &t.rows {
                let _ = writeln!(
                    s,
                    "{:<32} {:>10} {:>6} {:>6} {:>10}",
                    row.effect,
                    fmt_opt(row.f, 3),
                    row.df_num,
                    row.df_den,
                    fmt_opt(row.p, 4)
                );
            }
        }
        (None, Some(e)) => {
            let _ = writeln!(s, "not run: {e}");
        }
        (None, None) => {}
    }

    if !r.questionnaires.is_empty() {
        let _ = writeln!(s, "\nQuestionnaires (0-100)");
        for q in &r.questionnaires {
            let _ = writeln!(
                s,
                "{:<10} {:<4} handheld {:.2} ({:.2})  knob {:.2} ({:.2})  {}",
                q.task.as_str(),
                q.kind.as_str(),
                q.handheld.mean,
                q.handheld.sd,
                q.knob.mean,
                q.knob.sd,
                fmt_test(&q.test)
            );
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\nwarnings:");
        for w in &r.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    s
}
