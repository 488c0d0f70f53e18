use std::collections::BTreeMap;

use haptikit_core::controller::Condition;
use haptikit_core::stats::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// Reference CDF values computed at 30-digit precision with mpmath.
const T_REF: [(f64, f64, f64); 14] = [
    (-3.4641016151377544, 2.0, 0.037089950113724273048),
    (0.5, 1.0, 0.64758361765043327418),
    (1.0, 3.0, 0.80449889052211467904),
    (2.0, 5.0, 0.94903026058507082188),
    (-1.5, 10.0, 0.082253663222720090425),
    (11.48, 10.0, 0.99999977868694360776),
    (2.28, 10.0, 0.97710714294886895747),
    (0.55, 10.0, 0.70280508260154129639),
    (0.9, 10.0, 0.80536036899695879199),
    (3.0, 30.0, 0.99730501796717402669),
    (-0.1, 4.0, 0.46257792046972664073),
    (4.0, 8.0, 0.99802511359827733709),
    (1.96, 100.0, 0.97361054931688516698),
    (2.5, 2.5, 0.94771501846092230637),
];

const F_REF: [(f64, f64, f64, f64); 11] = [
    (0.798, 1.0, 8.0, 0.60223241143945774503),
    (19.671, 1.0, 8.0, 0.99781815682902750033),
    (62.447, 1.0, 8.0, 0.99995230020828450203),
    (1.182, 1.0, 8.0, 0.69138301580777775343),
    (0.011, 1.0, 8.0, 0.080947750697318015692),
    (6.056, 1.0, 8.0, 0.96073602307555564333),
    (0.001, 1.0, 8.0, 0.024452408763236830239),
    (3.0, 2.0, 10.0, 0.904632568359375),
    (1.5, 5.0, 20.0, 0.76571334109706132046),
    (4.2, 3.0, 7.0, 0.94618521546223165645),
    (10.0, 1.0, 1.0, 0.80501777095786335484),
];

#[test]
fn t_cdf_reference_values() {
    for (t, df, want) in T_REF {
        let got = t_cdf(t, df);
        assert!((got - want).abs() < 1e-8, "t = {t}, df = {df}: {got} vs {want}");
    }
}

#[test]
fn f_cdf_reference_values() {
    for (f, d1, d2, want) in F_REF {
        let got = f_cdf(f, d1, d2);
        assert!((got - want).abs() < 1e-8, "F = {f}, ({d1}, {d2}): {got} vs {want}");
        assert!((f_sf(f, d1, d2) - (1.0 - want)).abs() < 1e-8);
    }
}

#[test]
fn paired_t_hand_example() {
    let r = paired_t(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
    assert_eq!(r.df, 2);
    assert!((r.t - (-3.464_101_615_137_754_6)).abs() < 1e-9, "{}", r.t);
    let p_ref = 2.0 * 0.037089950113724273048;
    assert!((r.p - p_ref).abs() < 1e-8);
}

#[test]
fn cohens_d_pooled_convention() {
    // Condition means 1.65 / 2.05 with SDs 0.70 / 0.60.
    let d = (2.05_f64 - 1.65).abs() / ((0.70_f64.powi(2) + 0.60_f64.powi(2)) / 2.0).sqrt();
    assert!((d - 0.6136).abs() < 1e-4);
    assert!((d - 0.59).abs() < 0.05);
    // Same convention through paired_t on samples built to those moments.
    let x = with_moments(1.65, 0.70, 11, 1);
    let y = with_moments(2.05, 0.60, 11, 2);
    let r = paired_t(&x, &y).unwrap();
    assert!((r.cohens_d - d).abs() < 1e-9, "{}", r.cohens_d);
}

/// `n` values with exactly the given sample mean and SD.
fn with_moments(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let s = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    z.iter().map(|v| mean + sd * (v - m) / s).collect()
}

/// Classical sums of squares from marginal means. For a factor subset F
/// (bit 3 = subject, bits 2..0 = device, frequency, amplitude) the effect at
/// each observation is the inclusion-exclusion sum of marginal means over
/// every subset of F; SS_F is the sum of its squares.
struct BruteForce {
    ss: BTreeMap<u32, f64>,
}

impl BruteForce {
    fn new(data: &[[f64; 8]]) -> Self {
        let n = data.len();
        let obs: Vec<([usize; 4], f64)> = data
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().enumerate().map(move |(c, &v)| ([(c >> 2) & 1, (c >> 1) & 1, c & 1, s], v)))
            .collect();
        let levels = [2, 2, 2, n];
        let key = |mask: u32, idx: &[usize; 4]| -> Vec<usize> {
            (0..4).map(|f| if mask & (1 << f) != 0 { idx[f] } else { usize::MAX }).collect()
        };
        // Factor f (0..3) is bit f here: 0 = device, 1 = frequency, 2 = amplitude, 3 = subject.
        let mut means: BTreeMap<(u32, Vec<usize>), f64> = BTreeMap::new();
        for mask in 0..16u32 {
            let cells: usize = (0..4).filter(|f| mask & (1 << f) != 0).map(|f| levels[f]).product();
            let per = obs.len() / cells;
            let mut sums: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (idx, v) in &obs {
                *sums.entry(key(mask, idx)).or_default() += v;
            }
            for (k, s) in sums {
                means.insert((mask, k), s / per as f64);
            }
        }
        let mut ss = BTreeMap::new();
        for mask in 1..16u32 {
            let mut total = 0.0;
            for (idx, _) in &obs {
                let mut eff = 0.0;
                let mut sub = mask;
                loop {
                    let sign = if (mask.count_ones() - sub.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                    eff += sign * means[&(sub, key(sub, idx))];
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & mask;
                }
                total += eff * eff;
            }
            ss.insert(mask, total);
        }
        Self { ss }
    }

    /// SS for an effect named by device/frequency/amplitude membership, and
    /// for its interaction with subjects.
    fn effect(&self, device: bool, frequency: bool, amplitude: bool) -> (f64, f64) {
        let m = u32::from(device) | u32::from(frequency) << 1 | u32::from(amplitude) << 2;
        (self.ss[&m], self.ss[&(m | 8)])
    }
}

fn dataset(seed: u64, n: usize) -> Vec<[f64; 8]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 6.0).unwrap();
    let subject = Normal::new(0.0, 15.0).unwrap();
    (0..n)
        .map(|_| {
            let s = subject.sample(&mut rng);
            let mut row = [0.0; 8];
            for (c, v) in row.iter_mut().enumerate() {
                let cell = CellIndex::from_index(c);
                *v = 60.0 + s + 3.0 * cell.device as f64 + 25.0 * cell.frequency as f64 + 40.0 * cell.amplitude as f64
                    + 8.0 * (cell.frequency * cell.amplitude) as f64
                    + noise.sample(&mut rng);
            }
            row
        })
        .collect()
}

const MEMBERSHIP: [(bool, bool, bool); 7] = [
    (true, false, false),
    (false, true, false),
    (false, false, true),
    (true, true, false),
    (true, false, true),
    (false, true, true),
    (true, true, true),
];

#[test]
fn anova_matches_brute_force_on_three_datasets() {
    for (seed, n) in [(11, 9), (12, 11), (13, 5)] {
        let data = dataset(seed, n);
        let table = rm_anova_2x2x2(&data).unwrap();
        let bf = BruteForce::new(&data);
        for (row, (a, b, c)) in table.rows.iter().zip(MEMBERSHIP) {
            let (ss_e, ss_err) = bf.effect(a, b, c);
            assert!((row.ss_effect - ss_e).abs() <= 1e-6 * ss_e.max(1e-12), "{}: {} vs {ss_e}", row.effect, row.ss_effect);
            assert!((row.ss_error - ss_err).abs() <= 1e-6 * ss_err, "{}: {} vs {ss_err}", row.effect, row.ss_error);
            assert_eq!((row.df_num, row.df_den), (1, n - 1));
        }
        let ss_subj = bf.ss[&8];
        assert!((table.ss_subjects - ss_subj).abs() <= 1e-9 * ss_subj);
        assert!(table.closure_error() < 1e-9, "{}", table.closure_error());
    }
}

#[test]
fn additive_amplitude_effect_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let data: Vec<[f64; 8]> = (0..10)
        .map(|s| {
            let mut row = [0.0; 8];
            for (c, v) in row.iter_mut().enumerate() {
                *v = 50.0 + s as f64 * 4.0 + 30.0 * CellIndex::from_index(c).amplitude as f64 + noise.sample(&mut rng);
            }
            row
        })
        .collect();
    let t = rm_anova_2x2x2(&data).unwrap();
    for row in &t.rows {
        let f = row.f.unwrap();
        if row.effect == "Amplitude" {
            assert!(f > 500.0, "{f}");
            assert!(row.p.unwrap() < 1e-6);
        } else {
            assert!(f < 15.0, "{}: {f}", row.effect);
        }
    }
    assert_eq!(t.rows.len(), 7);
}

#[test]
fn zero_error_with_nonzero_effect_is_flagged() {
    // Every participant shows exactly the same device effect.
    let data: Vec<[f64; 8]> = (0..4)
        .map(|s| {
            let mut row = [s as f64; 8];
            for (c, v) in row.iter_mut().enumerate() {
                *v += 2.0 * CellIndex::from_index(c).device as f64;
            }
            row
        })
        .collect();
    let t = rm_anova_2x2x2(&data).unwrap();
    let device = t.row("Device").unwrap();
    assert!(device.degenerate);
    assert_eq!((device.f, device.p), (None, None));
}

fn planted_cohort(seed: u64, n: u32, effect: f64) -> Vec<ParticipantData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skill = Normal::new(1.65, 0.6).unwrap();
    let jitter = Normal::new(0.0, 0.25).unwrap();
    let err = Normal::new(0.0, 5.0).unwrap();
    (0..n)
        .map(|id| {
            let base: f64 = skill.sample(&mut rng);
            let mut tracking = Vec::new();
            for condition in Condition::ALL {
                for frequency in [0.3, 1.0] {
                    for amplitude in [150.0, 400.0] {
                        tracking.push(TrackingCell {
                            condition,
                            frequency,
                            amplitude,
                            mean_abs_error: 30.0 + 60.0 * frequency + amplitude / 8.0 + err.sample(&mut rng),
                        });
                    }
                }
            }
            ParticipantData {
                participant_id: id,
                throughput: BTreeMap::from([
                    (Condition::Handheld, base),
                    (Condition::Knob, base + effect + jitter.sample(&mut rng)),
                ]),
                tracking,
                questionnaires: Vec::new(),
            }
        })
        .collect()
}

#[test]
fn planted_device_effect_is_detected() {
    for seed in 0..5 {
        let report = build_report(&planted_cohort(seed, 11, 0.4)).unwrap();
        assert_eq!(report.n, 11);
        let t = report.throughput_test.result.as_ref().unwrap();
        assert_eq!(t.df, 10);
        assert!(t.p < 0.05, "seed {seed}: p = {}", t.p);
        assert_eq!(report.segments.len(), 4);
    }
}

#[test]
fn questionnaire_scores() {
    assert_eq!(sus_score(&[3.0; 10]).unwrap().value, 50.0);
    assert_eq!(sus_score(&[5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0]).unwrap().value, 100.0);
    assert_eq!(tlx_raw(&[50.0; 6]).unwrap().value, 50.0);
    assert_eq!(tlx_raw(&[0.0; 6]).unwrap().value, 0.0);
    let v = tlx_raw(&[30.0, 45.0, 20.0, 50.0, 35.0, 40.0]).unwrap().value;
    assert_eq!(v, (30.0 + 45.0 + 20.0 + 50.0 + 35.0 + 40.0) / 6.0);
    assert!((v - 36.667).abs() < 1e-3);
}

fn sample_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, n)
}

proptest! {
    #[test]
    fn p_values_in_unit_interval(t in -50.0..50.0f64, df in 1.0..200.0f64) {
        let p = t_two_tailed_p(t, df);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn p_decreases_with_abs_t(a in 0.0..20.0f64, gap in 0.01..5.0f64, df in 1.0..60.0f64) {
        prop_assert!(t_two_tailed_p(a + gap, df) < t_two_tailed_p(a, df));
        prop_assert!(f_sf(a + gap, 1.0, df) < f_sf(a, 1.0, df));
    }

    #[test]
    fn sus_on_grid(items in prop::collection::vec(1u8..=5, 10)) {
        let items: Vec<f64> = items.into_iter().map(f64::from).collect();
        let v = sus_score(&items).unwrap().value;
        prop_assert!((0.0..=100.0).contains(&v));
        prop_assert_eq!((v / 2.5).fract(), 0.0);
    }

    #[test]
    fn paired_t_swap_and_shift((x, y) in (3usize..20).prop_flat_map(|n| (sample_vec(n..n + 1), sample_vec(n..n + 1))), c in -50.0..50.0f64) {
        let r = paired_t(&x, &y).unwrap();
        let s = paired_t(&y, &x).unwrap();
        prop_assert!((r.t + s.t).abs() <= 1e-9 * r.t.abs().max(1.0));
        prop_assert!((r.p - s.p).abs() < 1e-12);
        prop_assert_eq!(r.df, x.len() - 1);
        let xs: Vec<f64> = x.iter().map(|v| v + c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let q = paired_t(&xs, &ys).unwrap();
        prop_assert!((q.t - r.t).abs() <= 1e-6 * r.t.abs().max(1.0));
        prop_assert!((q.p - r.p).abs() < 1e-6);
        prop_assert!((q.cohens_d - r.cohens_d).abs() <= 1e-6 * r.cohens_d.max(1.0));
    }

    #[test]
    fn anova_closure_and_scale(seed in 0u64..1000, n in 2usize..14, c in 0.01..100.0f64) {
        let data = dataset(seed, n);
        let t = rm_anova_2x2x2(&data).unwrap();
        prop_assert!(t.closure_error() < 1e-9);
        let scaled: Vec<[f64; 8]> = data.iter().map(|r| r.map(|v| v * c)).collect();
        let u = rm_anova_2x2x2(&scaled).unwrap();
        for (a, b) in t.rows.iter().zip(&u.rows) {
            let (fa, fb) = (a.f.unwrap(), b.f.unwrap());
            prop_assert!(fa >= 0.0);
            prop_assert!((fa - fb).abs() <= 1e-7 * fa.max(1.0));
            prop_assert!((a.p.unwrap() - b.p.unwrap()).abs() < 1e-9);
        }
    }
}
