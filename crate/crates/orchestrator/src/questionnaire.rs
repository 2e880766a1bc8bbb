//! Post-game questionnaire: answers as submitted by a participant, and the
//! checks applied before they are stored.

use std::collections::BTreeMap;

use dilemma_core::Labeling;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::OrchestratorError;
use crate::payout::NormBin;

pub const TRAIT_ITEMS: [&str; 7] = [
    "trustworthiness",
    "intelligence",
    "cooperativeness",
    "likability",
    "fairness",
    "agency",
    "experience",
];

pub const SEVEN_C_ITEMS: [&str; 7] = [
    "clarity",
    "conciseness",
    "concreteness",
    "coherence",
    "courteousness",
    "correctness",
    "completeness",
];

pub const LIKERT_RANGE: std::ops::RangeInclusive<i8> = -3..=3;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub gender: Option<String>,
    #[serde(default)]
    pub field: Option<String>,
}

/// What the client sends. Sections not in the session's battery stay empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireAnswers {
    #[serde(default)]
    pub norm_estimate: Option<NormBin>,
    #[serde(default)]
    pub trait_likerts: BTreeMap<String, i8>,
    #[serde(default)]
    pub seven_c_likerts: BTreeMap<String, i8>,
    #[serde(default)]
    pub humanness: Option<i8>,
    #[serde(default)]
    pub llm_familiarity: Option<u8>,
    /// Raw slider positions, stored as given.
    #[serde(default)]
    pub svo_items: Vec<u32>,
    #[serde(default)]
    pub demographics: Demographics,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub participant_id: String,
    #[serde(flatten)]
    pub answers: QuestionnaireAnswers,
}

fn likert_block(
    name: &str,
    asked: bool,
    items: &[&str],
    values: &BTreeMap<String, i8>,
) -> Result<(), OrchestratorError> {
    let invalid = |m: String| Err(OrchestratorError::QuestionnaireInvalid(m));
    if !asked {
        return if values.is_empty() {
            Ok(())
        } else {
            invalid(format!("{name} was not asked"))
        };
    }
    for (k, v) in values {
        if !items.contains(&k.as_str()) {
            return invalid(format!("unknown {name} item {k:?}"));
        }
        if !LIKERT_RANGE.contains(v) {
            return invalid(format!("{name} item {k:?} = {v} outside [-3, 3]"));
        }
    }
    if let Some(missing) = items.iter().find(|i| !values.contains_key(**i)) {
        return invalid(format!("{name} item {missing:?} missing"));
    }
    Ok(())
}

impl QuestionnaireAnswers {
    /// Checks the answers against the session's battery, bins and labeling:
    /// every asked Likert item present and within [-3, 3], and the humanness
    /// item present exactly when associates' nature was not disclosed.
    pub fn validate(&self, config: &SessionConfig) -> Result<(), OrchestratorError> {
        let invalid = |m: String| Err(OrchestratorError::QuestionnaireInvalid(m));
        match (config.asks("norm_estimate"), self.norm_estimate) {
            (true, None) => return invalid("norm estimate missing".into()),
            (false, Some(_)) => return invalid("norm estimate was not asked".into()),
            (true, Some(bin)) if !config.norm_bins().contains(&bin) => {
                return invalid(format!("[{}, {}) is not a configured bin", bin.lo, bin.hi))
            }
            _ => {}
        }
        likert_block("trait", config.asks("traits"), &TRAIT_ITEMS, &self.trait_likerts)?;
        likert_block("7C", config.asks("seven_c"), &SEVEN_C_ITEMS, &self.seven_c_likerts)?;
        let humanness_expected =
            config.asks("humanness") && config.treatment.labeling == Labeling::Uninformed;
        match (humanness_expected, self.humanness) {
            (true, None) => return invalid("humanness missing".into()),
            (false, Some(_)) => return invalid("humanness is only asked when labels are withheld".into()),
            (true, Some(v)) if !LIKERT_RANGE.contains(&v) => {
                return invalid(format!("humanness = {v} outside [-3, 3]"))
            }
            _ => {}
        }
        if config.asks("llm_familiarity") != self.llm_familiarity.is_some() {
            return invalid("llm familiarity must be answered exactly when asked".into());
        }
        if !config.asks("svo") && !self.svo_items.is_empty() {
            return invalid("svo was not asked".into());
        }
        Ok(())
    }
}
