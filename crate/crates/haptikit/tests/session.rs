//! Headless sessions through the sample-driven runner.

mod common;

use common::{short_config, simulate};
use haptikit::log::{read_log, LogRecord, MemorySink, NullSink, TrialOutcome};
use haptikit::runner::SessionRunner;
use haptikit::synthetic::run_synthetic;
use haptikit::wire::{ControlMessage, Deflection, Phase, SampleMessage, View};
use haptikit_core::controller::Condition;
use haptikit_core::stats::QuestionnaireKind;
use std::f64::consts::PI;

fn started(cfg: haptikit::config::SessionConfig) -> (SessionRunner<MemorySink>, Condition) {
    let mut runner = SessionRunner::new(cfg, MemorySink::default()).unwrap();
    assert!(runner.control(&ControlMessage::StartTrial, None).unwrap());
    let c = runner.active_condition().unwrap();
    (runner, c)
}

#[test]
fn identical_seeds_give_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&short_config(2, 7), &dir.path().join("a"));
    let b = simulate(&short_config(2, 7), &dir.path().join("b"));
    let c = simulate(&short_config(2, 8), &dir.path().join("c"));
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert!(a == b, "same seed produced different logs");
    assert!(a != c);
}

#[test]
fn session_log_is_complete_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(1, 3);
    let log = read_log(&simulate(&cfg, dir.path())).unwrap();
    assert!(log.is_complete());
    assert_eq!(log.config, cfg);

    // Targeting under both devices, then tracking under both, knob first
    // for odd participants.
    let blocks: Vec<(String, Condition)> = log
        .records
        .iter()
        .filter_map(|(_, r)| match r {
            LogRecord::BlockStart { task, condition, .. } => Some((task.to_string(), *condition)),
            _ => None,
        })
        .collect();
    assert_eq!(
        blocks,
        vec![
            ("targeting".to_string(), Condition::Knob),
            ("targeting".to_string(), Condition::Handheld),
            ("tracking".to_string(), Condition::Knob),
            ("tracking".to_string(), Condition::Handheld),
        ]
    );
    // 8 targeting trials and 4 segments per device.
    assert_eq!(log.summaries().count(), 2 * (8 + 4));
    // TLX then SUS after every block.
    let forms: Vec<QuestionnaireKind> = log
        .records
        .iter()
        .filter_map(|(_, r)| match r {
            LogRecord::Questionnaire { score, .. } => Some(score.kind),
            _ => None,
        })
        .collect();
    assert_eq!(forms, [QuestionnaireKind::Tlx, QuestionnaireKind::Sus].repeat(4));

    let mut last_t = 0;
    for (_, r) in &log.records {
        if let LogRecord::Samples { rows } = r {
            for row in rows {
                assert!(row.t_ms() > last_t || last_t == 0);
                last_t = row.t_ms();
            }
        }
    }
}

#[test]
fn synthetic_targeting_throughput_is_plausible() {
    let dir = tempfile::tempdir().unwrap();
    let log = read_log(&simulate(&short_config(4, 11), dir.path())).unwrap();
    for c in Condition::ALL {
        let tps: Vec<f64> = log
            .summaries()
            .filter(|s| s.condition == c && !s.training)
            .filter_map(|s| match &s.outcome {
                TrialOutcome::Targeting(t) => t.throughput(),
                _ => None,
            })
            .collect();
        assert_eq!(tps.len(), 6, "{c}: every test trial completes");
        let mean = tps.iter().sum::<f64>() / tps.len() as f64;
        assert!((1.0..=3.0).contains(&mean), "{c}: {mean} bits/s");
    }
}

#[test]
fn operator_beats_the_still_cursor_at_low_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let log = read_log(&simulate(&short_config(2, 5), dir.path())).unwrap();
    let mut checked = 0;
    for s in log.summaries() {
        if let TrialOutcome::Tracking(seg) = &s.outcome {
            if seg.frequency == 0.3 && seg.amplitude == 150.0 {
                let baseline = 2.0 * seg.amplitude / PI;
                assert!(seg.mean_abs_error < baseline, "{} vs {baseline}", seg.mean_abs_error);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 2);
}

#[test]
fn rendering_does_not_change_the_log() {
    let cfg = short_config(3, 2);
    let mut shown = SessionRunner::new(cfg.clone(), MemorySink::default()).unwrap();
    run_synthetic(&mut shown).unwrap();
    let mut hidden = SessionRunner::new(cfg, MemorySink::default()).unwrap().without_display();
    run_synthetic(&mut hidden).unwrap();
    assert_eq!(shown.into_sink().0, hidden.into_sink().0);
}

#[test]
fn displays_arrive_at_sixty_hertz() {
    let (mut runner, c) = started(short_config(2, 1));
    let mut frames = Vec::new();
    for t in (4..=1000).step_by(4) {
        frames.extend(runner.ingest(&SampleMessage::new(t, 0.0, c, false)).unwrap().displays);
    }
    // Ticks 0..996 cover frames 0..=59.
    assert_eq!(frames.len(), 60);
    assert!(frames.iter().all(|f| matches!(f.view, View::Target { .. }) && f.phase == Phase::Idle));
    assert!(frames.windows(2).all(|w| w[1].t_ms > w[0].t_ms));
}

#[test]
fn stale_and_mislabelled_samples_are_dropped() {
    let (mut runner, c) = started(short_config(2, 1));
    let wrong_unit = if c == Condition::Handheld { "rad" } else { "mm" };
    assert!(runner.ingest(&SampleMessage::new(10, 0.0, c, false)).unwrap().row.is_some());
    assert!(runner.ingest(&SampleMessage::new(10, 1.0, c, false)).unwrap().row.is_none());
    assert!(runner.ingest(&SampleMessage::new(5, 1.0, c, false)).unwrap().row.is_none());
    let mislabelled = SampleMessage {
        t_ms: 20,
        deflection: Deflection { value: 1.0, unit: wrong_unit.into() },
        buttons: 0,
    };
    assert!(runner.ingest(&mislabelled).unwrap().row.is_none());
    assert!(runner.ingest(&SampleMessage::new(30, f64::NAN, c, false)).unwrap().row.is_none());
    assert!(runner.ingest(&SampleMessage::new(30, 0.0, c, false)).unwrap().row.is_some());
    let n = runner.counters();
    assert_eq!((n.samples_accepted, n.stale_dropped, n.unit_mismatch_dropped), (2, 2, 2));
}

#[test]
fn heartbeat_alone_leaves_the_trial_incomplete() {
    let mut cfg = short_config(2, 1);
    cfg.plan.targeting.options.timeout_ms = 3000;
    let (mut runner, c) = started(cfg);
    runner.ingest(&SampleMessage::new(50, 0.0, c, false)).unwrap();
    let opened = runner.active_trial().unwrap();
    for t in (100..=4000).step_by(50) {
        runner.ingest(&SampleMessage::new(t, 0.0, c, false)).unwrap();
    }
    let first = &runner.summaries()[0];
    assert_eq!(first.trial_id, opened);
    assert!(!first.completed && !first.aborted);
    match &first.outcome {
        TrialOutcome::Targeting(t) => {
            assert!(t.mt.is_none() && t.t0_ms.is_none());
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(runner.counters().trials_incomplete, 1);
}

#[test]
fn abort_ends_the_trial() {
    let (mut runner, c) = started(short_config(2, 1));
    runner.ingest(&SampleMessage::new(100, 0.0, c, false)).unwrap();
    assert!(runner.control(&ControlMessage::Abort, Some("operator")).unwrap());
    let s = &runner.summaries()[0];
    assert!(s.aborted && !s.completed);
    // Nothing to abort during the inter-trial gap.
    assert!(!runner.control(&ControlMessage::Abort, None).unwrap());
}

#[test]
fn questionnaires_are_validated() {
    let mut cfg = short_config(2, 1);
    cfg.plan.targeting.training_trials = 1;
    cfg.plan.targeting.test_trials = 1;
    cfg.plan.targeting.options.timeout_ms = 2500;
    let (mut runner, c) = started(cfg);
    let mut t = 0;
    while runner.current_display().phase != Phase::Questionnaire {
        t += 50;
        runner.ingest(&SampleMessage::new(t, 0.0, c, false)).unwrap();
        assert!(t < 20_000);
    }
    match runner.current_display().view {
        View::Questionnaire { questionnaire, condition, .. } => {
            assert_eq!(questionnaire, QuestionnaireKind::Tlx);
            assert_eq!(condition, c);
        }
        other => panic!("{other:?}"),
    }

    let sus = ControlMessage::QuestionnaireSubmit { kind: QuestionnaireKind::Sus, items: vec![3.0; 10] };
    assert!(runner.rejection_reason(&sus).unwrap().contains("tlx"));
    assert!(!runner.control(&sus, None).unwrap());
    let short = ControlMessage::QuestionnaireSubmit { kind: QuestionnaireKind::Tlx, items: vec![50.0; 5] };
    assert!(!runner.control(&short, None).unwrap());
    let out_of_range = ControlMessage::QuestionnaireSubmit { kind: QuestionnaireKind::Tlx, items: vec![120.0; 6] };
    assert!(!runner.control(&out_of_range, None).unwrap());
    let tlx = ControlMessage::QuestionnaireSubmit { kind: QuestionnaireKind::Tlx, items: vec![50.0; 6] };
    assert!(runner.control(&tlx, None).unwrap());
    assert!(runner.control(&sus, None).unwrap());
    assert_eq!(runner.counters().controls_rejected, 3);
    assert_eq!(runner.current_display().phase, Phase::Ready);

    let scores: Vec<f64> = runner
        .sink()
        .0
        .iter()
        .filter_map(|r| match r {
            LogRecord::Questionnaire { score, .. } => Some(score.value),
            _ => None,
        })
        .collect();
    assert_eq!(scores, vec![50.0, 50.0]);
}

#[test]
fn controls_are_rejected_out_of_phase() {
    let mut runner = SessionRunner::new(short_config(2, 1), NullSink).unwrap();
    assert!(runner.rejection_reason(&ControlMessage::Abort).is_some());
    let tlx = ControlMessage::QuestionnaireSubmit { kind: QuestionnaireKind::Tlx, items: vec![50.0; 6] };
    assert!(!runner.control(&tlx, None).unwrap());
    assert!(runner.control(&ControlMessage::StartTrial, None).unwrap());
    assert!(!runner.control(&ControlMessage::StartTrial, None).unwrap());
}

#[test]
fn bad_configs_are_refused() {
    let mut cfg = short_config(2, 1);
    cfg.plan.condition_order = vec![Condition::Knob, Condition::Knob];
    assert!(SessionRunner::new(cfg, NullSink).is_err());
    let mut cfg = short_config(2, 1);
    cfg.stations.handheld.mapping.rate_gain = 0.0;
    assert!(SessionRunner::new(cfg, NullSink).is_err());
}
