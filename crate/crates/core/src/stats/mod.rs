//! Analysis pipeline: paired t-tests with Cohen's d, 2×2×2 repeated-measures
//! ANOVA, raw NASA-TLX and SUS scoring, and the study report.

mod anova;
mod dist;
mod paired;
mod questionnaire;
mod report;

use thiserror::Error;

pub use anova::{rm_anova_2x2x2, AnovaRow, AnovaTable, CellIndex, EFFECT_NAMES};
pub use dist::{f_cdf, f_sf, ln_gamma, regularized_incomplete_beta, t_cdf, t_two_tailed_p};
pub use paired::{paired_t, PairedTestResult};
pub use questionnaire::{sus_score, tlx_raw, QuestionnaireKind, QuestionnaireScore};
pub use report::{
    build_report, format_report, ConditionSummary, ParticipantData, QuestionnaireEntry, QuestionnaireRow, SegmentRow, StatsReport,
    TestOutcome, TrackingCell,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} paired observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("x and y differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("differences have zero variance (every difference is {0}); t is undefined")]
    ZeroVariance(f64),
    #[error("non-finite value in the data")]
    NonFinite,
    #[error("participant {participant} is missing cell {cell}")]
    MissingCell { participant: usize, cell: usize },
    #[error("{0}")]
    OutOfRange(String),
    #[error("need at least 2 complete participants, got {0}")]
    TooFewParticipants(usize),
}
