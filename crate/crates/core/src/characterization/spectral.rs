use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{invalid, CharacterizationError};

/// Welch-averaged cross and auto spectra between an input `x` and output `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Bin frequencies, Hz (DC through Nyquist).
    pub frequencies: Vec<f64>,
    pub sxx: Vec<f64>,
    pub syy: Vec<f64>,
    /// conj(X)·Y
    pub sxy: Vec<Complex64>,
    pub segments: usize,
}

impl SpectralEstimate {
    /// H1 transfer estimate Sxy/Sxx at bin `k`.
    pub fn transfer(&self, k: usize) -> Complex64 {
        self.sxy[k] / self.sxx[k]
    }

    pub fn coherence(&self, k: usize) -> f64 {
        self.sxy[k].norm_sqr() / (self.sxx[k] * self.syy[k])
    }
}

/// Hann-windowed, mean-removed segments of `segment_len` samples with the
/// given fractional overlap.
pub fn welch(
    x: &[f64],
    y: &[f64],
    sample_rate: f64,
    segment_len: usize,
    overlap: f64,
) -> Result<SpectralEstimate, CharacterizationError> {
    if x.len() != y.len() {
        return invalid("input and output records differ in length");
    }
    if segment_len < 2 || segment_len > x.len() {
        return invalid(format!("segment length {segment_len} incompatible with record of {}", x.len()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return invalid("overlap must be in [0, 1)");
    }
    let hop = ((segment_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut sxx = vec![0.0; bins];
    let mut syy = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut bx = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut by = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= x.len() {
        let xs = &x[start..start + segment_len];
        let ys = &y[start..start + segment_len];
        let mx = xs.iter().sum::<f64>() / segment_len as f64;
        let my = ys.iter().sum::<f64>() / segment_len as f64;
        for i in 0..segment_len {
            bx[i] = Complex64::new((xs[i] - mx) * window[i], 0.0);
            by[i] = Complex64::new((ys[i] - my) * window[i], 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..bins {
            sxx[k] += bx[k].norm_sqr();
            syy[k] += by[k].norm_sqr();
            sxy[k] += bx[k].conj() * by[k];
        }
        segments += 1;
        start += hop;
    }
    let frequencies = (0..bins).map(|k| k as f64 * sample_rate / segment_len as f64).collect();
    Ok(SpectralEstimate {
        frequencies,
        sxx,
        syy,
        sxy,
        segments,
    })
}
