//! Binomial GLM of per-participant cooperation counts on standardized
//! post-game perception ratings.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use dilemma_core::Pairing;

use crate::effect::{mean, variance};
use crate::error::StatsError;
use crate::glm::{fit_binomial_glm, GlmFit};

/// The seven communication-quality ratings followed by the seven
/// impression ratings of the associate.
pub const SEVEN_C_ITEMS: [&str; 7] = [
    "clarity",
    "conciseness",
    "concreteness",
    "coherence",
    "courteousness",
    "correctness",
    "completeness",
];

pub const TRAIT_ITEMS: [&str; 7] = [
    "trustworthiness",
    "intelligence",
    "cooperativeness",
    "likability",
    "fairness",
    "agency",
    "experience",
];

pub const PERCEPTION_ITEMS: [&str; 14] = [
    "clarity",
    "conciseness",
    "concreteness",
    "coherence",
    "courteousness",
    "correctness",
    "completeness",
    "trustworthiness",
    "intelligence",
    "cooperativeness",
    "likability",
    "fairness",
    "agency",
    "experience",
];

pub const NORM_TERM: &str = "normative_expectation";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmScope {
    /// Human–human participants only.
    HumanHuman,
    /// All human–agent participants, with persona dummies on a fair-agent
    /// baseline.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireRow {
    pub participant_id: String,
    pub pairing: Pairing,
    pub cooperation_count: u32,
    pub rounds: u32,
    pub perceptions: BTreeMap<String, f64>,
    /// Estimated cooperation rate of others, as a fraction.
    pub norm_expectation: Option<f64>,
}

fn standardize(column: &mut [f64]) -> Result<(), StatsError> {
    let m = mean(column);
    let sd = variance(column).sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::RankDeficientDesign);
    }
    for v in column {
        *v = (*v - m) / sd;
    }
    Ok(())
}

/// Fits cooperation counts on every perception item and the normative
/// expectation, each standardized within the selected sample.
pub fn questionnaire_glm(rows: &[QuestionnaireRow], scope: GlmScope) -> Result<GlmFit, StatsError> {
    let sample: Vec<&QuestionnaireRow> = rows
        .iter()
        .filter(|r| match scope {
            GlmScope::HumanHuman => r.pairing == Pairing::HH,
            GlmScope::Pooled => r.pairing.is_human_agent(),
        })
        .collect();
    if sample.is_empty() {
        return Err(StatsError::InsufficientData("no participants in scope".into()));
    }

    let mut names = vec!["(Intercept)".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; sample.len()]];
    for item in PERCEPTION_ITEMS {
        let col = sample
            .iter()
            .map(|r| {
                r.perceptions.get(item).copied().ok_or_else(|| {
                    StatsError::Schema(format!("participant {} lacks {item}", r.participant_id))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        names.push(item.to_string());
        columns.push(col);
    }
    let norm = sample
        .iter()
        .map(|r| {
            r.norm_expectation.ok_or_else(|| {
                StatsError::Schema(format!("participant {} lacks {NORM_TERM}", r.participant_id))
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    names.push(NORM_TERM.to_string());
    columns.push(norm);
    for col in &mut columns[1..] {
        standardize(col)?;
    }
    if scope == GlmScope::Pooled {
        for dummy in [Pairing::HC, Pairing::HS] {
            names.push(format!("treatment_{dummy}"));
            columns.push(
                sample
                    .iter()
                    .map(|r| if r.pairing == dummy { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
    }

    let x = DMatrix::from_fn(sample.len(), columns.len(), |i, j| columns[j][i]);
    let successes: Vec<f64> = sample.iter().map(|r| f64::from(r.cooperation_count)).collect();
    let trials: Vec<f64> = sample.iter().map(|r| f64::from(r.rounds)).collect();
    fit_binomial_glm(&x, &names, &successes, &trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, pairing: Pairing) -> QuestionnaireRow {
        let perceptions = PERCEPTION_ITEMS
            .iter()
            .enumerate()
            .map(|(k, n)| (n.to_string(), ((i * 7 + k * 13) % 11) as f64 - 5.0 + (i % (k + 2)) as f64))
            .collect();
        QuestionnaireRow {
            participant_id: format!("p{i}"),
            pairing,
            cooperation_count: (i % 11) as u32,
            rounds: 10,
            perceptions,
            norm_expectation: Some((i % 5) as f64 / 5.0 + 0.1),
        }
    }

    #[test]
    fn missing_norm_is_schema_error() {
        let mut rows: Vec<_> = (0..40).map(|i| row(i, Pairing::HH)).collect();
        rows[3].norm_expectation = None;
        assert!(matches!(
            questionnaire_glm(&rows, GlmScope::HumanHuman),
            Err(StatsError::Schema(_))
        ));
    }

    #[test]
    fn constant_predictor_is_rank_deficient() {
        let mut rows: Vec<_> = (0..40).map(|i| row(i, Pairing::HH)).collect();
        for r in &mut rows {
            r.norm_expectation = Some(0.5);
        }
        assert_eq!(
            questionnaire_glm(&rows, GlmScope::HumanHuman),
            Err(StatsError::RankDeficientDesign)
        );
    }

    #[test]
    fn pooled_model_has_two_dummies() {
        let rows: Vec<_> = (0..90)
            .map(|i| row(i, [Pairing::HF, Pairing::HC, Pairing::HS][i % 3]))
            .collect();
        let fit = questionnaire_glm(&rows, GlmScope::Pooled).unwrap();
        let dummies: Vec<_> = fit.terms.iter().filter(|t| t.name.starts_with("treatment_")).collect();
        assert_eq!(dummies.len(), 2);
        assert_eq!(dummies[0].name, "treatment_HC");
        assert_eq!(dummies[1].name, "treatment_HS");
        assert_eq!(fit.terms.len(), 1 + 15 + 2);
    }
}
