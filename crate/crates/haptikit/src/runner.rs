//! Sample-driven session simulation on the 1 kHz grid.
//!
//! A sample stamped `t` first advances every tick before `t` on the input
//! held so far, is then logged together with the cursor at that moment, and
//! becomes the held input from tick `t` on. Controls take effect before the
//! next unprocessed tick.

use std::collections::BTreeMap;

use haptikit_core::controller::Condition;
use haptikit_core::harness::{
    map_input, Apparatus, SegmentSpec, TargetSpec, TargetingMachine, TargetingPhase, TargetingSample, Task,
    TrackingSegment,
};
use haptikit_core::stats::QuestionnaireKind;

use crate::config::SessionConfig;
use crate::log::{Counters, LogRecord, LogSink, SampleRow, Snapshot, TrialOutcome, TrialSpec, TrialSummary, SCHEMA_VERSION};
use crate::wire::{ControlMessage, DisplayMessage, Phase, SampleMessage, View, START_KEY};
use crate::Error;

/// Display frames per second.
pub const DISPLAY_RATE: u64 = 60;
/// Longest sample batch written as one log line.
const MAX_BATCH: usize = 500;
const DT: f64 = 1e-3;

#[derive(Debug, Clone)]
enum TargetingState {
    Gap { until: u64 },
    Trial { id: u64, machine: Box<TargetingMachine> },
}

#[derive(Debug, Clone)]
struct ActiveSegment {
    id: u64,
    spec: SegmentSpec,
    training: bool,
    reference: Vec<f64>,
    cursor: Vec<f64>,
}

#[derive(Debug, Clone)]
enum RunPhase {
    Ready {
        stage: usize,
    },
    Targeting {
        stage: usize,
        trials: Vec<(TargetSpec, bool)>,
        index: usize,
        state: TargetingState,
    },
    Tracking {
        stage: usize,
        segments: Vec<(SegmentSpec, bool)>,
        index: usize,
        active: Option<ActiveSegment>,
    },
    Questionnaire {
        stage: usize,
        next: QuestionnaireKind,
    },
    Done,
}

/// What became of one incoming sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// `None` when the sample was dropped.
    pub row: Option<SampleRow>,
    /// Trial running when the sample arrived.
    pub trial_id: Option<u64>,
    pub displays: Vec<DisplayMessage>,
}

pub struct SessionRunner<S: LogSink> {
    config: SessionConfig,
    stages: Vec<(Task, Condition)>,
    stations: BTreeMap<Condition, Apparatus>,
    sink: S,
    pending: Vec<SampleRow>,
    next_tick: u64,
    last_sample_t: Option<u64>,
    held_deflection: f64,
    held_buttons: u8,
    cursor: f64,
    phase: RunPhase,
    next_trial_id: u64,
    counters: Counters,
    summaries: Vec<TrialSummary>,
    last_frame: Option<u64>,
    outbox: Vec<DisplayMessage>,
    render: bool,
    restore: BTreeMap<u64, (u64, Snapshot)>,
}

impl<S: LogSink> SessionRunner<S> {
    /// Validates the config and writes the log header.
    pub fn new(config: SessionConfig, sink: S) -> Result<Self, Error> {
        config.validate()?;
        let mut stations = BTreeMap::new();
        for c in Condition::ALL {
            stations.insert(c, config.stations.get(c).build(c)?);
        }
        let stages = config.plan.stages();
        let cursor = config.stations.get(stages[0].1).mapping.center();
        let mut runner = Self {
            config,
            stages,
            stations,
            sink,
            pending: Vec::new(),
            next_tick: 0,
            last_sample_t: None,
            held_deflection: 0.0,
            held_buttons: 0,
            cursor,
            phase: RunPhase::Ready { stage: 0 },
            next_trial_id: 0,
            counters: Counters::default(),
            summaries: Vec::new(),
            last_frame: None,
            outbox: Vec::new(),
            render: true,
            restore: BTreeMap::new(),
        };
        runner.emit(LogRecord::Header {
            schema_version: SCHEMA_VERSION,
            config: Box::new(runner.config.clone()),
        })?;
        Ok(runner)
    }

    /// Logged open times and start states, keyed by trial id. Each trial is
    /// opened at its logged time from its logged state, so replay checks
    /// every trial on its own.
    pub fn with_restore_points(mut self, points: BTreeMap<u64, (u64, Snapshot)>) -> Self {
        self.restore = points;
        self
    }

    /// Stops producing display frames. Nothing logged depends on them.
    pub fn without_display(mut self) -> Self {
        self.render = false;
        self
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn summaries(&self) -> &[TrialSummary] {
        &self.summaries
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, RunPhase::Done)
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    /// Next tick to be simulated, ms.
    pub fn now(&self) -> u64 {
        self.next_tick
    }

    /// Condition whose deflection unit samples must carry right now.
    pub fn active_condition(&self) -> Option<Condition> {
        self.stage().map(|s| self.stages[s].1)
    }

    fn stage(&self) -> Option<usize> {
        match &self.phase {
            RunPhase::Ready { stage }
            | RunPhase::Targeting { stage, .. }
            | RunPhase::Tracking { stage, .. }
            | RunPhase::Questionnaire { stage, .. } => Some(*stage),
            RunPhase::Done => None,
        }
    }

    pub fn active_trial(&self) -> Option<u64> {
        match &self.phase {
            RunPhase::Targeting { state: TargetingState::Trial { id, .. }, .. } => Some(*id),
            RunPhase::Tracking { active: Some(a), .. } => Some(a.id),
            _ => None,
        }
    }

    pub fn ingest(&mut self, sample: &SampleMessage) -> Result<Ingested, Error> {
        let dropped = |runner: &Self| Ingested {
            row: None,
            trial_id: runner.active_trial(),
            displays: Vec::new(),
        };
        let Some(condition) = self.active_condition() else {
            return Ok(dropped(self));
        };
        if self.last_sample_t.is_some_and(|last| sample.t_ms <= last) {
            self.counters.stale_dropped += 1;
            return Ok(dropped(self));
        }
        if sample.deflection.unit != condition.deflection_unit() || !sample.deflection.value.is_finite() {
            self.counters.unit_mismatch_dropped += 1;
            return Ok(dropped(self));
        }
        self.advance_to(sample.t_ms)?;
        let row = SampleRow(sample.t_ms, sample.deflection.value, sample.buttons, self.cursor);
        self.pending.push(row);
        if self.pending.len() >= MAX_BATCH {
            self.flush_rows()?;
        }
        self.counters.samples_accepted += 1;
        self.held_deflection = sample.deflection.value;
        self.held_buttons = sample.buttons;
        self.last_sample_t = Some(sample.t_ms);
        Ok(Ingested {
            row: Some(row),
            trial_id: self.active_trial(),
            displays: std::mem::take(&mut self.outbox),
        })
    }

    /// Applies a control message and returns whether it had an effect.
    /// Rejected ones are logged with `applied: false`.
    pub fn control(&mut self, control: &ControlMessage, reason: Option<&str>) -> Result<bool, Error> {
        let t = self.next_tick;
        let applied = self.control_applies(control);
        self.emit(LogRecord::Control {
            t_ms: t,
            control: control.clone(),
            reason: reason.map(str::to_string),
            applied,
        })?;
        if !applied {
            self.counters.controls_rejected += 1;
            return Ok(false);
        }
        self.counters.controls_applied += 1;
        match control {
            ControlMessage::StartTrial => self.start_block()?,
            ControlMessage::Abort => self.abort(t)?,
            ControlMessage::QuestionnaireSubmit { kind, items } => self.submit(*kind, items, t)?,
        }
        Ok(true)
    }

    fn control_applies(&self, control: &ControlMessage) -> bool {
        match (control, &self.phase) {
            (ControlMessage::StartTrial, RunPhase::Ready { .. }) => true,
            (ControlMessage::Abort, _) => self.active_trial().is_some(),
            (ControlMessage::QuestionnaireSubmit { kind, items }, RunPhase::Questionnaire { next, .. }) => {
                kind == next && kind.score(items).is_ok()
            }
            _ => false,
        }
    }

    /// Notice for a control message that would be rejected now.
    pub fn rejection_reason(&self, control: &ControlMessage) -> Option<String> {
        if self.control_applies(control) {
            return None;
        }
        Some(match (control, &self.phase) {
            (ControlMessage::QuestionnaireSubmit { kind, items }, RunPhase::Questionnaire { next, .. }) => {
                if kind != next {
                    format!("expected the {next} questionnaire")
                } else {
                    kind.score(items).err().map(|e| e.to_string()).unwrap_or_default()
                }
            }
            (ControlMessage::StartTrial, _) => "no block is waiting to start".into(),
            (ControlMessage::Abort, _) => "no trial is running".into(),
            (ControlMessage::QuestionnaireSubmit { .. }, _) => "no questionnaire is open".into(),
        })
    }

    /// Writes out buffered samples. Call before dropping the runner.
    pub fn finish(&mut self) -> Result<(), Error> {
        self.flush_rows()?;
        self.sink.flush()
    }

    /// Display frame for the current state.
    pub fn current_display(&self) -> DisplayMessage {
        let t_ms = self.next_tick;
        let (view, phase) = match &self.phase {
            RunPhase::Ready { .. } => (View::Blank, Phase::Ready),
            RunPhase::Targeting { state: TargetingState::Gap { .. }, .. } => (View::Blank, Phase::InterTrial),
            RunPhase::Targeting { state: TargetingState::Trial { machine, .. }, .. } => {
                let phase = match machine.phase {
                    TargetingPhase::Idle => Phase::Idle,
                    TargetingPhase::Dwell => Phase::Dwell,
                    _ => Phase::Moving,
                };
                let view = View::Target {
                    center: machine.spec.target_center(),
                    width: machine.spec.width,
                    dwell_progress: machine.dwell_progress(t_ms.saturating_sub(1)),
                };
                (view, phase)
            }
            RunPhase::Tracking { stage, active, segments, index } => {
                let center = self.station_mapping_center(*stage);
                let ref_px = match active {
                    Some(a) => center + a.spec.reference_at(a.reference.len()),
                    None => center + segments.get(*index).map_or(0.0, |s| s.0.reference_at(0)),
                };
                (View::Tracking { ref_px }, Phase::Tracking)
            }
            RunPhase::Questionnaire { stage, next } => {
                let (task, condition) = self.stages[*stage];
                (View::Questionnaire { questionnaire: *next, task, condition }, Phase::Questionnaire)
            }
            RunPhase::Done => (View::Blank, Phase::Done),
        };
        DisplayMessage {
            t_ms,
            cursor_px: self.cursor,
            view,
            trial_id: self.active_trial(),
            phase,
            notice: None,
        }
    }

    fn station_mapping_center(&self, stage: usize) -> f64 {
        self.stations[&self.stages[stage].1].mapping.center()
    }

    fn emit(&mut self, record: LogRecord) -> Result<(), Error> {
        self.flush_rows()?;
        self.sink.record(&record)
    }

    fn flush_rows(&mut self) -> Result<(), Error> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let rows = std::mem::take(&mut self.pending);
        self.sink.record(&LogRecord::Samples { rows })
    }

    fn advance_to(&mut self, t: u64) -> Result<(), Error> {
        while self.next_tick < t {
            let tick = self.next_tick;
            self.tick(tick)?;
            self.next_tick += 1;
            let frame = tick * DISPLAY_RATE / 1000;
            if self.render && self.last_frame.is_none_or(|f| frame > f) {
                self.last_frame = Some(frame);
                let mut d = self.current_display();
                d.t_ms = tick;
                self.outbox.push(d);
            }
        }
        Ok(())
    }

    fn station(&mut self, stage: usize) -> &mut Apparatus {
        let c = self.stages[stage].1;
        self.stations.get_mut(&c).expect("both stations are built")
    }

    fn key(&self) -> bool {
        self.held_buttons & START_KEY != 0
    }

    fn tick(&mut self, t: u64) -> Result<(), Error> {
        let phase = std::mem::replace(&mut self.phase, RunPhase::Done);
        self.phase = self.tick_phase(phase, t)?;
        Ok(())
    }

    fn tick_phase(&mut self, phase: RunPhase, t: u64) -> Result<RunPhase, Error> {
        let held = self.held_deflection;
        match phase {
            RunPhase::Ready { stage } | RunPhase::Questionnaire { stage, .. } => {
                self.station(stage).step(held)?;
                Ok(phase)
            }
            RunPhase::Done => Ok(phase),
            RunPhase::Targeting { stage, trials, index, state } => {
                let state = match state {
                    TargetingState::Gap { until } if t >= until => self.open_target(stage, &trials[index], t)?,
                    TargetingState::Gap { until } => {
                        self.station(stage).step(held)?;
                        return Ok(RunPhase::Targeting {
                            stage,
                            trials,
                            index,
                            state: TargetingState::Gap { until },
                        });
                    }
                    trial => trial,
                };
                let TargetingState::Trial { id, mut machine } = state else {
                    unreachable!("gap handled above")
                };
                let moving = matches!(machine.phase, TargetingPhase::Moving | TargetingPhase::Dwell);
                let station = self.station(stage);
                let measured = station.step(held)?;
                let mapping = station.mapping.clone();
                self.cursor = if moving {
                    map_input(&mapping, measured, self.cursor, DT)
                } else {
                    machine.spec.start_pos
                };
                let sample = TargetingSample { t_ms: t, cursor: self.cursor, key: self.key() };
                if !machine.update(sample)?.is_done() {
                    return Ok(RunPhase::Targeting {
                        stage,
                        trials,
                        index,
                        state: TargetingState::Trial { id, machine },
                    });
                }
                self.close_target(stage, id, trials[index].1, *machine, false, t)?;
                Ok(self.next_target(stage, trials, index + 1, t))
            }
            RunPhase::Tracking { stage, segments, index, active } => {
                let mut seg = match active {
                    Some(a) => a,
                    None => self.open_segment(stage, segments[index], t)?,
                };
                let station = self.station(stage);
                let measured = station.step(held)?;
                let mapping = station.mapping.clone();
                self.cursor = map_input(&mapping, measured, self.cursor, DT);
                let i = seg.reference.len();
                seg.reference.push(mapping.center() + seg.spec.reference_at(i));
                seg.cursor.push(self.cursor);
                if seg.reference.len() < seg.spec.sample_count() {
                    return Ok(RunPhase::Tracking { stage, segments, index, active: Some(seg) });
                }
                self.close_segment(stage, seg, false, t)?;
                Ok(self.next_segment(stage, segments, index + 1))
            }
        }
    }

    fn snapshot(&self, stage: usize) -> Snapshot {
        let rig = &self.stations[&self.stages[stage].1].rig;
        Snapshot {
            device: rig.device,
            controller: rig.controller,
            cursor: self.cursor,
            held_deflection: self.held_deflection,
            held_buttons: self.held_buttons,
        }
    }

    fn begin_trial(&mut self, stage: usize, training: bool, spec: TrialSpec, t: u64) -> Result<u64, Error> {
        let id = self.next_trial_id;
        self.next_trial_id += 1;
        let state = self.snapshot(stage);
        self.emit(LogRecord::TrialStart {
            t_ms: t,
            trial_id: id,
            condition: self.stages[stage].1,
            training,
            spec,
            state,
        })?;
        if let Some((_, point)) = self.restore.get(&id).copied() {
            let rig = &mut self.station(stage).rig;
            rig.device = point.device;
            rig.controller = point.controller;
            self.cursor = point.cursor;
            self.held_deflection = point.held_deflection;
            self.held_buttons = point.held_buttons;
        }
        Ok(id)
    }

    fn open_target(&mut self, stage: usize, trial: &(TargetSpec, bool), t: u64) -> Result<TargetingState, Error> {
        let (spec, training) = *trial;
        self.cursor = spec.start_pos;
        let id = self.begin_trial(stage, training, TrialSpec::Targeting(spec), t)?;
        let options = self.config.plan.targeting.options.clone();
        let machine = TargetingMachine::new(spec, options, t, self.key())?.without_path();
        Ok(TargetingState::Trial { id, machine: Box::new(machine) })
    }

    fn close_target(
        &mut self,
        stage: usize,
        id: u64,
        training: bool,
        machine: TargetingMachine,
        aborted: bool,
        t: u64,
    ) -> Result<(), Error> {
        let mut trial = machine.finish();
        trial.end_ms = Some(trial.end_ms.unwrap_or(t));
        let completed = trial.completed;
        self.record_summary(TrialSummary {
            trial_id: id,
            condition: self.stages[stage].1,
            training,
            completed,
            aborted,
            end_ms: t,
            outcome: TrialOutcome::Targeting(trial),
        })
    }

    fn next_target(&mut self, stage: usize, trials: Vec<(TargetSpec, bool)>, index: usize, t: u64) -> RunPhase {
        if index >= trials.len() {
            return RunPhase::Questionnaire { stage, next: QuestionnaireKind::Tlx };
        }
        let until = match self.restore.get(&self.next_trial_id) {
            Some((opened, _)) => *opened,
            None => t + 1 + self.config.plan.inter_trial_ms,
        };
        RunPhase::Targeting {
            stage,
            trials,
            index,
            state: TargetingState::Gap { until },
        }
    }

    fn open_segment(&mut self, stage: usize, seg: (SegmentSpec, bool), t: u64) -> Result<ActiveSegment, Error> {
        let (spec, training) = seg;
        let id = self.begin_trial(stage, training, TrialSpec::Tracking(spec), t)?;
        let n = spec.sample_count();
        Ok(ActiveSegment {
            id,
            spec,
            training,
            reference: Vec::with_capacity(n),
            cursor: Vec::with_capacity(n),
        })
    }

    fn close_segment(&mut self, stage: usize, seg: ActiveSegment, aborted: bool, t: u64) -> Result<(), Error> {
        let completed = !aborted && seg.reference.len() == seg.spec.sample_count();
        let mut outcome = if seg.reference.is_empty() {
            TrackingSegment {
                frequency: seg.spec.frequency,
                amplitude: seg.spec.amplitude,
                periods: seg.spec.periods,
                ref_series: Vec::new(),
                cursor_series: Vec::new(),
                mean_abs_error: 0.0,
            }
        } else {
            TrackingSegment::new(seg.spec, seg.reference, seg.cursor)?
        };
        outcome.ref_series.clear();
        outcome.cursor_series.clear();
        self.record_summary(TrialSummary {
            trial_id: seg.id,
            condition: self.stages[stage].1,
            training: seg.training,
            completed,
            aborted,
            end_ms: t,
            outcome: TrialOutcome::Tracking(outcome),
        })
    }

    fn next_segment(&mut self, stage: usize, segments: Vec<(SegmentSpec, bool)>, index: usize) -> RunPhase {
        if index >= segments.len() {
            return RunPhase::Questionnaire { stage, next: QuestionnaireKind::Tlx };
        }
        RunPhase::Tracking { stage, segments, index, active: None }
    }

    fn record_summary(&mut self, summary: TrialSummary) -> Result<(), Error> {
        if summary.completed {
            self.counters.trials_completed += 1;
        } else {
            self.counters.trials_incomplete += 1;
        }
        self.emit(LogRecord::TrialSummary(summary.clone()))?;
        self.summaries.push(summary);
        self.sink.flush()
    }

    fn start_block(&mut self) -> Result<(), Error> {
        let RunPhase::Ready { stage } = self.phase else {
            return Ok(());
        };
        let (task, condition) = self.stages[stage];
        let t = self.next_tick;
        self.emit(LogRecord::BlockStart { t_ms: t, stage, task, condition })?;
        let screen = self.config.stations.get(condition).mapping.screen_width;
        self.phase = match task {
            Task::Targeting => {
                let (training, test) = self.config.plan.targets(condition, screen)?;
                let trials: Vec<_> = training
                    .into_iter()
                    .map(|s| (s, true))
                    .chain(test.into_iter().map(|s| (s, false)))
                    .collect();
                RunPhase::Targeting { stage, trials, index: 0, state: TargetingState::Gap { until: t } }
            }
            Task::Tracking => {
                let plan = self.config.plan.tracking_plan(condition)?;
                let segments: Vec<_> = plan
                    .training
                    .into_iter()
                    .map(|s| (s, true))
                    .chain(plan.test.into_iter().map(|s| (s, false)))
                    .collect();
                self.cursor = self.station_mapping_center(stage);
                RunPhase::Tracking { stage, segments, index: 0, active: None }
            }
        };
        Ok(())
    }

    fn abort(&mut self, t: u64) -> Result<(), Error> {
        let phase = std::mem::replace(&mut self.phase, RunPhase::Done);
        self.phase = match phase {
            RunPhase::Targeting { stage, trials, index, state: TargetingState::Trial { id, machine } } => {
                self.close_target(stage, id, trials[index].1, *machine, true, t)?;
                self.next_target(stage, trials, index + 1, t.saturating_sub(1))
            }
            RunPhase::Tracking { stage, segments, index, active: Some(seg) } => {
                self.close_segment(stage, seg, true, t)?;
                self.next_segment(stage, segments, index + 1)
            }
            other => other,
        };
        Ok(())
    }

    fn submit(&mut self, kind: QuestionnaireKind, items: &[f64], t: u64) -> Result<(), Error> {
        let RunPhase::Questionnaire { stage, .. } = self.phase else {
            return Ok(());
        };
        let (task, condition) = self.stages[stage];
        let score = kind.score(items)?;
        self.emit(LogRecord::Questionnaire { t_ms: t, task, condition, score })?;
        self.phase = match kind {
            QuestionnaireKind::Tlx => RunPhase::Questionnaire { stage, next: QuestionnaireKind::Sus },
            QuestionnaireKind::Sus if stage + 1 < self.stages.len() => RunPhase::Ready { stage: stage + 1 },
            QuestionnaireKind::Sus => RunPhase::Done,
        };
        if self.is_done() {
            let counters = self.counters;
            self.emit(LogRecord::SessionEnd { t_ms: t, counters })?;
            self.sink.flush()?;
        }
        Ok(())
    }
}
