//! Statistics and reporting for repeated-dilemma experiments.

pub mod annotations;
pub mod anova;
pub mod effect;
pub mod error;
pub mod glm;
pub mod nonparametric;
pub mod proportions;
pub mod questionnaire;
pub mod ranks;
pub mod report;
pub mod tukey;

use serde::{Deserialize, Serialize};

pub use annotations::{
    derive_breach, load_annotations, load_motive_ratings, motive_summary, resolve_agreements,
    AnnotationRecord, Motive, MotiveRating, ResolvedAgreements,
};
pub use anova::one_way_anova;
pub use effect::{cohen_d, cohen_h, spearman};
pub use error::StatsError;
pub use glm::{
    bin_by_frequency, breach_response_curve, fit_binomial_glm, fit_binomial_glm_with, GlmFit,
    GlmOptions, GlmTerm, PolynomialLogit,
};
pub use nonparametric::{mann_whitney_u, wilcoxon_signed_rank};
pub use proportions::proportions_ztest;
pub use questionnaire::{
    questionnaire_glm, GlmScope, Pairing, QuestionnaireRow, PERCEPTION_ITEMS, SEVEN_C_ITEMS,
    TRAIT_ITEMS,
};
pub use report::{
    emit_report, load_interactions, load_surveys, write_report, Dataset, InteractionRow, Manifest,
    ReportBundle, SectionStatus, SurveyRow,
};
pub use tukey::{ptukey, qtukey, tukey_hsd, TukeyRow};

/// Direction of a hypothesis test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The first sample (or the location shift) is larger.
    Greater,
    Less,
}

/// Outcome of a single hypothesis test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    /// Degrees of freedom; two values for F tests.
    pub df: Option<Vec<f64>>,
}

impl TestResult {
    pub(crate) fn new(test: &str, statistic: f64, p_value: f64) -> TestResult {
        TestResult {
            test: test.to_string(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            effect_size: None,
            df: None,
        }
    }
}
