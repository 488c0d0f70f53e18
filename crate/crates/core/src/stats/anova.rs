use serde::{Deserialize, Serialize};

use super::dist::f_sf;
use super::StatsError;

/// Effects in table order. A = device, B = frequency, C = amplitude.
pub const EFFECT_NAMES: [&str; 7] = [
    "Device",
    "Frequency",
    "Amplitude",
    "Device × Frequency",
    "Device × Amplitude",
    "Frequency × Amplitude",
    "Device × Frequency × Amplitude",
];

/// Factor membership of each effect as bits (A = 4, B = 2, C = 1).
const EFFECT_MASKS: [usize; 7] = [4, 2, 1, 6, 5, 3, 7];

/// Position of a (device, frequency, amplitude) level triple, each 0 or 1,
/// in a participant's eight-cell row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellIndex {
    pub device: usize,
    pub frequency: usize,
    pub amplitude: usize,
}

impl CellIndex {
    pub fn index(self) -> usize {
        self.device * 4 + self.frequency * 2 + self.amplitude
    }

    pub fn from_index(i: usize) -> Self {
        Self {
            device: (i >> 2) & 1,
            frequency: (i >> 1) & 1,
            amplitude: i & 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub effect: String,
    /// `None` when the error term is zero but the effect is not.
    pub f: Option<f64>,
    pub df_num: usize,
    pub df_den: usize,
    pub p: Option<f64>,
    pub ss_effect: f64,
    pub ss_error: f64,
    /// Error sum of squares is zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub n: usize,
    pub grand_mean: f64,
    pub ss_subjects: f64,
    /// Σ over participants and cells of (y − participant mean)².
    pub ss_within: f64,
}

impl AnovaTable {
    /// |ss_within − Σ(effect + error)| relative to ss_within.
    pub fn closure_error(&self) -> f64 {
        let parts: f64 = self.rows.iter().map(|r| r.ss_effect + r.ss_error).sum();
        if self.ss_within == 0.0 {
            parts.abs()
        } else {
            (self.ss_within - parts).abs() / self.ss_within
        }
    }

    pub fn row(&self, effect: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.effect == effect)
    }
}

fn sign(cell: usize, mask: usize) -> f64 {
    // −1 for level 0, +1 for level 1, multiplied over the effect's factors.
    if (!cell & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fully within-subjects 2×2×2 ANOVA. Each row holds one participant's eight
/// cell values ordered by [`CellIndex::index`]. Every effect is tested
/// against its own effect-by-participant interaction.
pub fn rm_anova_2x2x2(data: &[[f64; 8]]) -> Result<AnovaTable, StatsError> {
    let n = data.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    for (p, row) in data.iter().enumerate() {
        if let Some(cell) = row.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::MissingCell { participant: p, cell });
        }
    }
    let nf = n as f64;
    let grand_mean = data.iter().flatten().sum::<f64>() / (8.0 * nf);
    let subject_means: Vec<f64> = data.iter().map(|r| r.iter().sum::<f64>() / 8.0).collect();
    let ss_subjects = 8.0 * subject_means.iter().map(|m| (m - grand_mean).powi(2)).sum::<f64>();
    let ss_within = data
        .iter()
        .zip(&subject_means)
        .map(|(r, m)| r.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();

    let df_den = n - 1;
    let rows = EFFECT_NAMES
        .iter()
        .zip(EFFECT_MASKS)
        .map(|(name, mask)| {
            // Per-participant contrast for this effect.
            let l: Vec<f64> = data
                .iter()
                .map(|r| r.iter().enumerate().map(|(c, v)| sign(c, mask) * v).sum())
                .collect();
            let l_mean = l.iter().sum::<f64>() / nf;
            let ss_effect = nf * l_mean * l_mean / 8.0;
            let ss_error = l.iter().map(|x| (x - l_mean).powi(2)).sum::<f64>() / 8.0;
            let degenerate = ss_error == 0.0;
            let (f, p) = if degenerate {
                if ss_effect == 0.0 {
                    (Some(0.0), Some(1.0))
                } else {
                    (None, None)
                }
            } else {
                let f = ss_effect / (ss_error / df_den as f64);
                (Some(f), Some(f_sf(f, 1.0, df_den as f64)))
            };
            AnovaRow {
                effect: (*name).to_string(),
                f,
                df_num: 1,
                df_den,
                p,
                ss_effect,
                ss_error,
                degenerate,
            }
        })
        .collect();

    Ok(AnovaTable {
        rows,
        n,
        grand_mean,
        ss_subjects,
        ss_within,
    })
}
