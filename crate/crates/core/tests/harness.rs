use std::f64::consts::PI;

use haptikit_core::harness::*;
use proptest::prelude::*;

fn spec() -> TargetSpec {
    TargetSpec { amplitude: 400.0, width: 40.0, start_pos: 760.0, direction: 1 }
}

fn sample(t_ms: u64, cursor: f64, key: bool) -> TargetingSample {
    TargetingSample { t_ms, cursor, key }
}

#[test]
fn index_of_difficulty() {
    assert_eq!(id_bits(10.0, 10.0), 1.0);
    assert_eq!(id_bits(30.0, 10.0), 2.0);
    assert_eq!(id_bits(700.0, 100.0), 3.0);
}

#[test]
fn throughput_is_id_over_mt() {
    // Press at 100 ms, enter the target at 1350 ms, hold it.
    let samples = (0..=4000).step_by(10).map(|t| {
        let cursor = if t >= 1350 { 1160.0 } else { 760.0 };
        sample(t, cursor, (100..200).contains(&t))
    });
    let trial = run_targeting_trial(spec(), samples, &TargetingOptions::default()).unwrap();
    assert!(trial.completed);
    assert_eq!(trial.mt, Some(1.25));
    assert_eq!(trial.throughput(), Some(trial.id_bits / 1.25));
    assert_eq!(throughput(std::slice::from_ref(&trial)).unwrap(), trial.id_bits / 1.25);
}

#[test]
fn dwell_restarts_after_leaving() {
    let mut s = vec![sample(0, 760.0, true)];
    s.push(sample(500, 1160.0, false));
    s.push(sample(2499, 1160.0, false));
    // Out for a single sample, one ms short of completing.
    s.push(sample(2500, 1200.0, false));
    s.push(sample(2600, 1165.0, false));
    s.push(sample(4599, 1165.0, false));
    let trial = run_targeting_trial(spec(), s.clone(), &TargetingOptions::default()).unwrap();
    assert!(!trial.completed);
    s.push(sample(4600, 1165.0, false));
    let trial = run_targeting_trial(spec(), s, &TargetingOptions::default()).unwrap();
    assert!(trial.completed);
    assert_eq!(trial.dwell_start_ms, Some(2600));
    assert_eq!(trial.mt, Some(2.6));
}

#[test]
fn edge_of_target_counts_as_inside() {
    let s = [sample(0, 760.0, true), sample(10, 1180.0, false), sample(2010, 1180.0, false)];
    let trial = run_targeting_trial(spec(), s, &TargetingOptions::default()).unwrap();
    assert!(trial.completed);
    let s = [sample(0, 760.0, true), sample(10, 1180.001, false), sample(2010, 1180.001, false)];
    assert!(!run_targeting_trial(spec(), s, &TargetingOptions::default()).unwrap().completed);
}

#[test]
fn starting_inside_the_target_needs_a_press() {
    let inside = TargetSpec { start_pos: 1160.0, direction: 1, ..spec() };
    let s: Vec<_> = (0..5000).step_by(10).map(|t| sample(t, 1560.0, false)).collect();
    assert!(!run_targeting_trial(inside, s, &TargetingOptions::default()).unwrap().completed);
}

#[test]
fn tracking_error_identities() {
    let seg = SegmentSpec { frequency: 0.3, amplitude: 150.0, periods: 4 };
    let r = seg.reference();
    assert_eq!(tracking_error(&r, &r).unwrap(), 0.0);
    let shifted: Vec<f64> = r.iter().map(|v| v + 12.5).collect();
    assert!((tracking_error(&r, &shifted).unwrap() - 12.5).abs() < 1e-12);
}

#[test]
fn zero_cursor_gives_two_a_over_pi() {
    for (frequency, periods) in [(0.3, 4), (1.0, 8)] {
        for amplitude in [150.0, 400.0] {
            let seg = SegmentSpec { frequency, amplitude, periods };
            let r = seg.reference();
            let e = tracking_error(&r, &vec![0.0; r.len()]).unwrap();
            let want = 2.0 * amplitude / PI;
            assert!((e / want - 1.0).abs() < 0.005, "{frequency} Hz {amplitude} px: {e} vs {want}");
        }
    }
}

#[test]
fn plan_has_the_two_by_two_structure() {
    for seed in 0..50 {
        let plan = make_tracking_plan([150.0, 400.0], [0.3, 1.0], seed).unwrap();
        assert_eq!(plan.test.len(), 4);
        assert_eq!(plan.training.len(), 16);
        let mut cells: Vec<(u64, u64)> = plan.test.iter().map(|s| (s.frequency.to_bits(), s.amplitude.to_bits())).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 4);
        for s in plan.test.iter().chain(&plan.training) {
            assert_eq!(s.periods, if s.frequency == 0.3 { 4 } else { 8 });
            // Whole periods on the 1 kHz grid.
            let cycles = s.sample_count() as f64 * s.frequency / 1000.0;
            assert!((cycles - f64::from(s.periods)).abs() < 1e-3, "{cycles}");
        }
        for cell in &plan.test {
            assert_eq!(plan.training.iter().filter(|s| *s == cell).count(), 4);
        }
    }
}

proptest! {
    #[test]
    fn completed_trials_hold_the_target_for_the_dwell(
        steps in prop::collection::vec((1u64..400, 700.0..1250.0f64, prop::bool::weighted(0.05)), 1..200)
    ) {
        let mut t = 0;
        let mut samples = Vec::new();
        for (dt, cursor, key) in steps {
            t += dt;
            samples.push(sample(t, cursor, key));
        }
        let sp = spec();
        let trial = run_targeting_trial(sp, samples.clone(), &TargetingOptions::default()).unwrap();
        if trial.completed {
            let t0 = trial.t0_ms.unwrap();
            let ds = trial.dwell_start_ms.unwrap();
            let end = trial.end_ms.unwrap();
            prop_assert!(ds > t0);
            prop_assert!(end - ds >= 2000);
            prop_assert_eq!(trial.mt, Some((ds - t0) as f64 / 1000.0));
            for s in samples.iter().filter(|s| s.t_ms >= ds && s.t_ms <= end) {
                prop_assert!(sp.contains(s.cursor));
            }
        } else {
            prop_assert!(trial.mt.is_none());
        }
    }

    #[test]
    fn constant_offset_is_recovered(amp in 1.0..500.0f64, f in 0.1..5.0f64, c in -100.0..100.0f64) {
        let seg = SegmentSpec { frequency: f, amplitude: amp, periods: 2 };
        let r = seg.reference();
        let cur: Vec<f64> = r.iter().map(|v| v + c).collect();
        prop_assert!((tracking_error(&r, &cur).unwrap() - c.abs()).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn id_monotone(a in 1.0..2000.0f64, w in 1.0..500.0f64, d in 0.1..100.0f64) {
        prop_assert!(id_bits(a, w) > 0.0);
        prop_assert!(id_bits(a + d, w) > id_bits(a, w));
        prop_assert!(id_bits(a, w + d) < id_bits(a, w));
    }
}
