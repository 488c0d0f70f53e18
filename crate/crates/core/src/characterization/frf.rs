use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::welch;
use super::{invalid, CharacterizationError, Chirp};
use crate::controller::ImpedanceConfig;
use crate::device::{DeviceParams, DeviceState};
use crate::rig::Rig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrfOptions {
    pub seed: u64,
    /// White torque disturbance added at every tick, mNm rms.
    pub torque_noise_sd: f64,
    /// Each run starts at rest at a random offset within ±this from center, rad.
    pub initial_offset: f64,
    /// Welch segment length, s.
    pub segment_seconds: f64,
    pub overlap: f64,
    /// Resolution of the logarithmic output grid.
    pub bands_per_octave: f64,
    pub flat_band: (f64, f64),
    /// The inertia fit starts at this multiple of the resonance.
    pub fit_start_multiple: f64,
    pub fit_upper: f64,
    pub coherence_threshold: f64,
}

impl Default for FrfOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            torque_noise_sd: 0.02,
            initial_offset: 0.02,
            segment_seconds: 4.0,
            overlap: 0.5,
            bands_per_octave: 12.0,
            flat_band: (0.5, 2.0),
            fit_start_multiple: 3.0,
            fit_upper: 100.0,
            coherence_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfResult {
    /// Hz
    pub frequencies: Vec<f64>,
    /// rad/mNm
    pub magnitude: Vec<f64>,
    /// deg
    pub phase: Vec<f64>,
    pub coherence: Vec<f64>,
    /// rad/mNm
    pub flat_band_gain: f64,
    /// Hz
    pub resonance_hz: f64,
    /// mNm/(rad/s²)
    pub fitted_inertia: Option<f64>,
    pub runs_averaged: usize,
    pub resonance_at_edge: bool,
    pub warnings: Vec<String>,
}

struct RunEstimate {
    response: Vec<Complex64>,
    coherence: Vec<f64>,
}

struct Band {
    frequency: f64,
    bins: std::ops::Range<usize>,
}

/// Angle (rad) response to the torque chirp, averaged over `runs` repetitions.
pub fn measure_frf(
    params: &DeviceParams,
    overlay: &ImpedanceConfig,
    chirp: &Chirp,
    runs: usize,
    options: &FrfOptions,
) -> Result<FrfResult, CharacterizationError> {
    if runs == 0 {
        return invalid("runs must be >= 1");
    }
    if overlay.stiffness <= 0.0 {
        return invalid("a centering stiffness is required for the frequency response");
    }
    if (chirp.sample_rate - overlay.loop_rate).abs() > 1e-9 {
        return invalid("chirp sample rate must equal the control loop rate");
    }
    if options.torque_noise_sd < 0.0 || options.initial_offset < 0.0 {
        return invalid("noise and offset must be >= 0");
    }
    let segment_len = (options.segment_seconds * chirp.sample_rate).round() as usize;
    if segment_len < 16 || segment_len > chirp.len() {
        return invalid("Welch segment longer than the chirp record");
    }
    // Validates the plant/controller pair once before fanning out.
    Rig::new(params.clone(), overlay.clone(), DeviceState::at_rest(overlay.center))?;

    let bin_width = chirp.sample_rate / segment_len as f64;
    let bands = log_bands(chirp.f0, chirp.f1.min(options.fit_upper), bin_width, options.bands_per_octave);
    if bands.is_empty() {
        return invalid("no spectral bins inside the excited band");
    }

    let estimates = (0..runs)
        .into_par_iter()
        .map(|run| single_run(params, overlay, chirp, run, options, segment_len, &bands))
        .collect::<Result<Vec<_>, _>>()?;

    let n = bands.len();
    let mut magnitude = vec![0.0; n];
    let mut phase_acc = vec![Complex64::new(0.0, 0.0); n];
    let mut coherence = vec![0.0; n];
    for est in &estimates {
        for i in 0..n {
            magnitude[i] += est.response[i].norm();
            phase_acc[i] += Complex64::from_polar(1.0, est.response[i].arg());
            coherence[i] += est.coherence[i];
        }
    }
    let scale = 1.0 / runs as f64;
    magnitude.iter_mut().for_each(|m| *m *= scale);
    coherence.iter_mut().for_each(|c| *c *= scale);
    let phase: Vec<f64> = phase_acc.iter().map(|p| p.arg().to_degrees()).collect();
    let frequencies: Vec<f64> = bands.iter().map(|b| b.frequency).collect();

    let mut warnings = Vec::new();
    let flat: Vec<f64> = frequencies
        .iter()
        .zip(&magnitude)
        .filter(|(f, _)| **f >= options.flat_band.0 && **f <= options.flat_band.1)
        .map(|(_, m)| *m)
        .collect();
    let flat_band_gain = if flat.is_empty() {
        warnings.push("no grid points inside the flat band".to_string());
        f64::NAN
    } else {
        median(flat)
    };

    let peak = magnitude
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let resonance_hz = frequencies[peak];
    let resonance_at_edge = peak == 0 || peak + 1 == n;
    if resonance_at_edge {
        warnings.push(format!("resonance {resonance_hz:.3} Hz lies at the edge of the grid"));
    }

    let fit_lo = options.fit_start_multiple * resonance_hz;
    let fit: Vec<usize> = (0..n)
        .filter(|&i| frequencies[i] >= fit_lo && frequencies[i] <= options.fit_upper)
        .collect();
    let fitted_inertia = if fit.len() < 2 {
        warnings.push("too few grid points above resonance for the inertia fit".to_string());
        None
    } else {
        // Least squares on log|H| = -log J - 2 log ω.
        let mean_log_j = fit
            .iter()
            .map(|&i| {
                let w = std::f64::consts::TAU * frequencies[i];
                -(magnitude[i].ln()) - 2.0 * w.ln()
            })
            .sum::<f64>()
            / fit.len() as f64;
        Some(mean_log_j.exp())
    };
    let low_coherence: Vec<f64> = fit
        .iter()
        .filter(|&&i| coherence[i] < options.coherence_threshold)
        .map(|&i| frequencies[i])
        .collect();
    if !low_coherence.is_empty() {
        warnings.push(format!(
            "coherence below {} at {} fit-band frequencies (first {:.2} Hz)",
            options.coherence_threshold,
            low_coherence.len(),
            low_coherence[0]
        ));
    }

    Ok(FrfResult {
        frequencies,
        magnitude,
        phase,
        coherence,
        flat_band_gain,
        resonance_hz,
        fitted_inertia,
        runs_averaged: runs,
        resonance_at_edge,
        warnings,
    })
}

fn single_run(
    params: &DeviceParams,
    overlay: &ImpedanceConfig,
    chirp: &Chirp,
    run: usize,
    options: &FrfOptions,
    segment_len: usize,
    bands: &[Band],
) -> Result<RunEstimate, CharacterizationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(run as u64));
    let offset = if options.initial_offset > 0.0 {
        rng.random_range(-options.initial_offset..=options.initial_offset)
    } else {
        0.0
    };
    let noise = Normal::new(0.0, options.torque_noise_sd).map_err(|e| CharacterizationError::InvalidArgument(e.to_string()))?;
    let mut rig = Rig::new(params.clone(), overlay.clone(), DeviceState::at_rest(overlay.center + offset))?;
    let cpt = params.encoder_counts_per_turn;
    // Recording continues for half a segment after the sweep so the last
    // frequencies are not lost under the window taper.
    let mut input = chirp.samples.clone();
    input.resize(chirp.len() + segment_len / 2, 0.0);
    let mut angle = Vec::with_capacity(input.len());
    for &torque in &input {
        let disturbance = if options.torque_noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let out = rig.tick(torque + disturbance)?;
        angle.push(crate::device::dequantize_encoder(out.counts_after, cpt) - overlay.center);
    }
    let est = welch(&input, &angle, chirp.sample_rate, segment_len, options.overlap)?;
    let mut response = Vec::with_capacity(bands.len());
    let mut coherence = Vec::with_capacity(bands.len());
    for band in bands {
        let mut sxy = Complex64::new(0.0, 0.0);
        let (mut sxx, mut syy) = (0.0, 0.0);
        for k in band.bins.clone() {
            sxy += est.sxy[k];
            sxx += est.sxx[k];
            syy += est.syy[k];
        }
        response.push(sxy / sxx);
        coherence.push(if sxx > 0.0 && syy > 0.0 { sxy.norm_sqr() / (sxx * syy) } else { 0.0 });
    }
    Ok(RunEstimate { response, coherence })
}

/// Groups FFT bins into logarithmic bands between `lo` and `hi`; bands that
/// contain no bin are dropped.
fn log_bands(lo: f64, hi: f64, bin_width: f64, per_octave: f64) -> Vec<Band> {
    let ratio = 2f64.powf(1.0 / per_octave);
    let mut bands = Vec::new();
    let mut edge = lo;
    while edge < hi {
        let next = (edge * ratio).min(hi * (1.0 + 1e-12));
        let first = (edge / bin_width).ceil() as usize;
        let last = (next / bin_width).ceil() as usize;
        let first = first.max(1);
        if last > first {
            let freq = (first..last).map(|k| k as f64 * bin_width).sum::<f64>() / (last - first) as f64;
            bands.push(Band { frequency: freq, bins: first..last });
        }
        edge = next;
    }
    bands
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_cover_each_bin_once() {
        let bands = log_bands(0.1, 100.0, 0.25, 12.0);
        let mut next = 1;
        for b in &bands {
            assert_eq!(b.bins.start, next);
            next = b.bins.end;
            assert!(b.frequency >= 0.1 && b.frequency <= 100.0);
        }
        assert_eq!(next, 401);
        assert!(bands.windows(2).all(|w| w[0].frequency < w[1].frequency));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
