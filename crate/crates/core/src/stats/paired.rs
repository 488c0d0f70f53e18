use serde::{Deserialize, Serialize};

use super::dist::t_two_tailed_p;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub t: f64,
    pub df: usize,
    /// Two-tailed.
    pub p: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    /// |mean_x − mean_y| over the pooled SD √((sd_x² + sd_y²)/2).
    pub cohens_d: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub(crate) fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Paired two-tailed t-test on x − y.
///
/// Identical samples give t = 0, p = 1. Differences that are constant but
/// not all zero have no variance to test against and are rejected.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<PairedTestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let (mean_x, mean_y) = (mean(x), mean(y));
    let (sd_x, sd_y) = (sd(x), sd(y));
    let pooled = ((sd_x * sd_x + sd_y * sd_y) / 2.0).sqrt();
    let cohens_d = if pooled > 0.0 { (mean_x - mean_y).abs() / pooled } else { 0.0 };
    let df = n - 1;

    let (t, p) = if d.iter().all(|&v| v == 0.0) {
        (0.0, 1.0)
    } else {
        let sd_d = sd(&d);
        if sd_d == 0.0 {
            return Err(StatsError::ZeroVariance(d[0]));
        }
        let t = mean(&d) / (sd_d / (n as f64).sqrt());
        (t, t_two_tailed_p(t, df as f64))
    };
    Ok(PairedTestResult {
        t,
        df,
        p,
        mean_x,
        mean_y,
        sd_x,
        sd_y,
        cohens_d,
        n,
    })
}
