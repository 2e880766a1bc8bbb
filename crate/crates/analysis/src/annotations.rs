//! Expert annotations of pre-play communication: agreement detection with
//! third-annotator resolution, and motive ratings for promise breaking.

use std::collections::BTreeMap;
use std::io::Read;

use dilemma_core::Choice;
use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::nonparametric::wilcoxon_signed_rank;
use crate::{Alternative, TestResult};

/// A promise is broken when an agreement to play A was reached and the
/// player chose B.
pub fn derive_breach(agreement: bool, choice: Choice) -> bool {
    agreement && choice == Choice::B
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub interaction_id: String,
    pub annotator_id: String,
    pub p1_preferred: Option<Choice>,
    pub p2_preferred: Option<Choice>,
    pub p1_desires_from_p2: Option<Choice>,
    pub p2_desires_from_p1: Option<Choice>,
    pub agreement_reached: bool,
    /// This record is the tie-breaking third annotation.
    #[serde(default)]
    pub resolved_by_third: bool,
}

/// Agreement per interaction after resolution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedAgreements {
    pub agreements: BTreeMap<String, bool>,
    /// Interactions whose annotators disagreed with no resolver on file.
    pub excluded: Vec<String>,
}

/// Collapses annotations per interaction: unanimous primary annotators
/// decide; on disagreement the third annotator decides; without one the
/// interaction is excluded.
pub fn resolve_agreements(records: &[AnnotationRecord]) -> ResolvedAgreements {
    let mut by_id: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_id.entry(&r.interaction_id).or_default().push(r);
    }
    let mut out = ResolvedAgreements::default();
    for (id, recs) in by_id {
        let primary: Vec<bool> = recs
            .iter()
            .filter(|r| !r.resolved_by_third)
            .map(|r| r.agreement_reached)
            .collect();
        let resolver = recs.iter().find(|r| r.resolved_by_third);
        let value = match (primary.first(), resolver) {
            (Some(&first), _) if primary.iter().all(|&v| v == first) => Some(first),
            (_, Some(r)) => Some(r.agreement_reached),
            _ => None,
        };
        match value {
            Some(v) => {
                out.agreements.insert(id.to_string(), v);
            }
            None => out.excluded.push(id.to_string()),
        }
    }
    out
}

pub fn load_annotations(reader: impl Read) -> Result<Vec<AnnotationRecord>, StatsError> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| StatsError::Schema(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motive {
    RiskAversion,
    InequalityAversion,
    StrategicDefection,
    UnconditionalDefection,
}

impl Motive {
    pub const ALL: [Motive; 4] = [
        Motive::RiskAversion,
        Motive::InequalityAversion,
        Motive::StrategicDefection,
        Motive::UnconditionalDefection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Motive::RiskAversion => "risk_aversion",
            Motive::InequalityAversion => "inequality_aversion",
            Motive::StrategicDefection => "strategic_defection",
            Motive::UnconditionalDefection => "unconditional_defection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotiveRating {
    pub interaction_id: String,
    pub annotator_id: String,
    pub risk_aversion: i8,
    pub inequality_aversion: i8,
    pub strategic_defection: i8,
    pub unconditional_defection: i8,
    pub coherent: bool,
    pub error_free: bool,
}

impl MotiveRating {
    pub fn score(&self, motive: Motive) -> i8 {
        match motive {
            Motive::RiskAversion => self.risk_aversion,
            Motive::InequalityAversion => self.inequality_aversion,
            Motive::StrategicDefection => self.strategic_defection,
            Motive::UnconditionalDefection => self.unconditional_defection,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        for m in Motive::ALL {
            if !(-3..=3).contains(&self.score(m)) {
                return Err(StatsError::Schema(format!(
                    "{} rating {} for {} outside [-3, 3]",
                    m.as_str(),
                    self.score(m),
                    self.interaction_id
                )));
            }
        }
        Ok(())
    }
}

pub fn load_motive_ratings(reader: impl Read) -> Result<Vec<MotiveRating>, StatsError> {
    let ratings: Vec<MotiveRating> = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| StatsError::Schema(e.to_string()))?;
    for r in &ratings {
        r.validate()?;
    }
    Ok(ratings)
}

/// One-sample Wilcoxon test of each motive's Likert scores against 0. Every
/// annotator's rating is a separate observation.
pub fn motive_summary(
    ratings: &[MotiveRating],
    alternative: Alternative,
) -> Vec<(Motive, Result<TestResult, StatsError>)> {
    Motive::ALL
        .into_iter()
        .map(|m| {
            let scores: Vec<f64> = ratings.iter().map(|r| f64::from(r.score(m))).collect();
            let result = if scores.is_empty() {
                Err(StatsError::InsufficientData("no ratings".into()))
            } else {
                wilcoxon_signed_rank(&scores, 0.0, alternative).map(|mut t| {
                    t.test = format!("wilcoxon_signed_rank:{}", m.as_str());
                    t
                })
            };
            (m, result)
        })
        .collect()
}
