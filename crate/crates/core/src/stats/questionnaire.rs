use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionnaireKind {
    /// Raw (unweighted) NASA-TLX.
    Tlx,
    Sus,
}

impl QuestionnaireKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionnaireKind::Tlx => "tlx",
            QuestionnaireKind::Sus => "sus",
        }
    }

    pub fn item_count(self) -> usize {
        match self {
            QuestionnaireKind::Tlx => 6,
            QuestionnaireKind::Sus => 10,
        }
    }

    pub fn score(self, items: &[f64]) -> Result<QuestionnaireScore, StatsError> {
        match self {
            QuestionnaireKind::Tlx => tlx_raw(items),
            QuestionnaireKind::Sus => sus_score(items),
        }
    }
}

impl std::fmt::Display for QuestionnaireKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireScore {
    pub kind: QuestionnaireKind,
    /// 0–100
    pub value: f64,
    pub item_responses: Vec<f64>,
}

/// SUS from ten 1–5 responses: odd items score (r − 1), even items (5 − r),
/// summed and scaled by 2.5.
pub fn sus_score(items: &[f64]) -> Result<QuestionnaireScore, StatsError> {
    if items.len() != 10 {
        return Err(StatsError::OutOfRange(format!("SUS needs 10 items, got {}", items.len())));
    }
    if let Some(bad) = items.iter().find(|&&r| !(1.0..=5.0).contains(&r) || r.fract() != 0.0) {
        return Err(StatsError::OutOfRange(format!("SUS responses are whole numbers 1–5, got {bad}")));
    }
    let sum: f64 = items
        .iter()
        .enumerate()
        .map(|(i, r)| if i % 2 == 0 { r - 1.0 } else { 5.0 - r })
        .sum();
    Ok(QuestionnaireScore {
        kind: QuestionnaireKind::Sus,
        value: sum * 2.5,
        item_responses: items.to_vec(),
    })
}

/// Unweighted mean of the six 0–100 subscales.
pub fn tlx_raw(subscales: &[f64]) -> Result<QuestionnaireScore, StatsError> {
    if subscales.len() != 6 {
        return Err(StatsError::OutOfRange(format!("TLX needs 6 subscales, got {}", subscales.len())));
    }
    if let Some(bad) = subscales.iter().find(|&&v| !(0.0..=100.0).contains(&v)) {
        return Err(StatsError::OutOfRange(format!("TLX subscales lie in 0–100, got {bad}")));
    }
    Ok(QuestionnaireScore {
        kind: QuestionnaireKind::Tlx,
        value: subscales.iter().sum::<f64>() / 6.0,
        item_responses: subscales.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sus_extremes() {
        assert_eq!(sus_score(&[3.0; 10]).unwrap().value, 50.0);
        let best = [5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0];
        assert_eq!(sus_score(&best).unwrap().value, 100.0);
        let worst = [1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0];
        assert_eq!(sus_score(&worst).unwrap().value, 0.0);
    }

    #[test]
    fn sus_rejects_bad_items() {
        assert!(sus_score(&[3.0; 9]).is_err());
        assert!(sus_score(&[0.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]).is_err());
        assert!(sus_score(&[3.5, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]).is_err());
    }

    #[test]
    fn tlx_mean() {
        assert_eq!(tlx_raw(&[50.0; 6]).unwrap().value, 50.0);
        assert_eq!(tlx_raw(&[0.0; 6]).unwrap().value, 0.0);
        assert_eq!(tlx_raw(&[30.0, 45.0, 20.0, 50.0, 35.0, 40.0]).unwrap().value, 220.0 / 6.0);
        assert!(tlx_raw(&[101.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(tlx_raw(&[1.0; 5]).is_err());
    }
}
