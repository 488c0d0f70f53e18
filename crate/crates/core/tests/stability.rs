//! Uncoupled stability sweep against an exact discrete-time model of the
//! sampled loop.

use haptikit_core::characterization::{stability_sweep, StabilityOptions};
use haptikit_core::controller::ImpedanceConfig;
use haptikit_core::device::{DeviceParams, DEFAULT_VISCOUS};

const J: f64 = 7.91e-4;
const T: f64 = 1e-3;

/// Closed-loop matrix of the ZOH-sampled plant J θ'' + b θ' = u under
/// u_k = −K θ_k.
fn closed_loop(j: f64, b: f64, k: f64) -> [[f64; 2]; 2] {
    let a = b / j;
    let e = (-a * T).exp();
    let a12 = (1.0 - e) / a;
    let b1 = (T - (1.0 - e) / a) / b;
    let b2 = (1.0 - e) / b;
    [[1.0 - b1 * k, a12], [-b2 * k, e]]
}

fn spectral_radius(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.sqrt()
    }
}

/// Brute-force eigenvalue scan: largest K on a fine grid with every
/// closed-loop pole inside the unit circle.
fn oracle_max_k(j: f64, b: f64) -> f64 {
    let mut last = 0.0;
    let mut k = 0.001;
    while k < 1000.0 {
        if spectral_radius(closed_loop(j, b, k)) >= 1.0 {
            return last;
        }
        last = k;
        k += 0.001;
    }
    f64::INFINITY
}

/// Jury conditions on z² − tr·z + det, solved for the boundary by bisection.
fn jury_max_k(j: f64, b: f64) -> f64 {
    let stable = |k: f64| {
        let m = closed_loop(j, b, k);
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        det.abs() < 1.0 && 1.0 - tr + det > 0.0 && 1.0 + tr + det > 0.0
    };
    let (mut lo, mut hi) = (1e-6, 1000.0);
    assert!(stable(lo) && !stable(hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn sweep_max_k(params: &DeviceParams, k_step: f64, perturbation: f64) -> f64 {
    let base = ImpedanceConfig::spring(0.0, params.peak_torque());
    let res = stability_sweep(params, &base, 0.0, k_step, 200.0, perturbation, &StabilityOptions::default()).unwrap();
    assert!(res.steps.last().is_some_and(|s| !s.stable), "no instability found");
    res.max_stable_k
}

#[test]
fn oracle_routes_agree() {
    for b in [2.5e-3, 5e-3, 1e-2, 2e-2] {
        let scan = oracle_max_k(J, b);
        let jury = jury_max_k(J, b);
        assert!((scan - jury).abs() < 2e-3, "b = {b}: scan {scan} vs Jury {jury}");
    }
}

#[test]
fn oracle_approaches_small_damping_limit() {
    // For b·T/J → 0 the boundary tends to 2b/T.
    let b = 1e-4;
    let k = oracle_max_k(J, b);
    assert!((k / (2.0 * b / T) - 1.0).abs() < 0.01, "{k}");
}

#[test]
fn linear_plant_matches_eigenvalue_oracle() {
    let b = 5e-3;
    let oracle = oracle_max_k(J, b);
    let empirical = sweep_max_k(&DeviceParams::linear(J, b), 0.25, 0.01);
    let rel = empirical / oracle - 1.0;
    println!("b = {b}: empirical {empirical}, oracle {oracle:.3}, {:+.1}%", rel * 100.0);
    assert!(rel.abs() <= 0.20);
}

#[test]
fn max_stable_k_increases_with_damping() {
    let ks: Vec<f64> = [2.5e-3, 5e-3, 1e-2]
        .iter()
        .map(|&b| sweep_max_k(&DeviceParams::linear(J, b), 0.25, 0.01))
        .collect();
    println!("{ks:?}");
    assert!(ks.windows(2).all(|w| w[1] > w[0]), "{ks:?}");
}

#[test]
fn default_device_lands_in_band() {
    let params = DeviceParams::default();
    assert_eq!(params.viscous, DEFAULT_VISCOUS);
    let base = ImpedanceConfig::spring(0.0, params.peak_torque());
    let res = stability_sweep(&params, &base, 0.0, 0.25, 40.0, 0.2, &StabilityOptions::default()).unwrap();
    let k = res.max_stable_trigger_stiffness;
    println!("default device: K = {} mNm/rad, {k:.3} N/mm, {:.2} N", res.max_stable_k, res.max_stable_force);
    assert!((0.5..=2.0).contains(&k), "{k}");
    assert!(res.max_stable_force > 0.0);
}

#[test]
fn slower_loop_lowers_max_stable_k() {
    let params = DeviceParams::linear(J, 1e-2);
    let opts = StabilityOptions::default();
    let at = |rate: f64| {
        let base = ImpedanceConfig { loop_rate: rate, ..ImpedanceConfig::spring(0.0, params.peak_torque()) };
        stability_sweep(&params, &base, 0.0, 0.25, 200.0, 0.01, &opts).unwrap().max_stable_k
    };
    let (fast, slow) = (at(1000.0), at(500.0));
    assert!(slow < fast, "500 Hz {slow} vs 1 kHz {fast}");
}
