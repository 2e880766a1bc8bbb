//! Session configuration, loadable from one TOML file.

use std::path::Path;
use std::sync::Arc;

use dilemma_agents::{Backend, ChatCompletionsBackend, MockBackend, MockConfig, Persona};
use dilemma_core::{ExecMode, Labeling, Pairing, PayoffMatrix, RoundRules, StageTimers};
use serde::{Deserialize, Serialize};

use crate::error::OrchestratorError;
use crate::money::{Money, Rate};
use crate::payout::NormBin;
use crate::quiz::QuizItem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treatment {
    pub pairing: Pairing,
    pub labeling: Labeling,
    #[serde(default = "yes")]
    pub communication: bool,
}

fn yes() -> bool {
    true
}

impl Treatment {
    /// Persona of every agent in a human-agent treatment.
    pub fn agent_persona(&self) -> Option<Persona> {
        match self.pairing {
            Pairing::HH => None,
            Pairing::HF => Some(Persona::Fair),
            Pairing::HC => Some(Persona::Cooperative),
            Pairing::HS => Some(Persona::Selfish),
        }
    }

    /// How associates are described to participants.
    pub fn associate_label(&self) -> &'static str {
        match (self.labeling, self.pairing) {
            (Labeling::Uninformed, _) => "intelligent machines or humans",
            (Labeling::Informed, Pairing::HH) => "humans",
            (Labeling::Informed, _) => "intelligent machines",
        }
    }
}

/// Questionnaire sections, in the order they may appear in a battery.
pub const QUESTIONNAIRE_SECTIONS: [&str; 7] = [
    "norm_estimate",
    "seven_c",
    "traits",
    "humanness",
    "llm_familiarity",
    "svo",
    "demographics",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock {
        #[serde(default)]
        seed: u64,
    },
    /// An OpenAI-compatible endpoint; the key is read from `api_key_env`.
    ChatCompletions {
        id: String,
        base_url: String,
        model: String,
        #[serde(default = "default_key_env")]
        api_key_env: String,
    },
}

fn default_key_env() -> String {
    "DILEMMA_API_KEY".into()
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Mock { seed: 0 }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn Backend>, OrchestratorError> {
        Ok(match self {
            BackendConfig::Mock { seed } => Arc::new(MockBackend::new(MockConfig {
                seed: *seed,
                ..MockConfig::default()
            })),
            BackendConfig::ChatCompletions {
                id,
                base_url,
                model,
                api_key_env,
            } => Arc::new(
                ChatCompletionsBackend::from_env(id, base_url, model, api_key_env)
                    .map_err(|e| OrchestratorError::ConfigInvalid(e.to_string()))?,
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub treatment: Treatment,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default)]
    pub timers: StageTimers,
    #[serde(default)]
    pub payoff: PayoffMatrix,
    #[serde(default = "default_rate")]
    pub exchange_rate: Rate,
    #[serde(default = "default_fee")]
    pub show_up_fee: Money,
    #[serde(default = "default_bonus")]
    pub norm_bonus: Money,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_battery")]
    pub questionnaire_battery: Vec<String>,
    /// Width of the normative-expectation bins, in percentage points.
    #[serde(default = "default_bin_width")]
    pub norm_bin_width: u32,
    #[serde(default = "default_questionnaire_ms")]
    pub questionnaire_ms: u64,
    /// Comprehension quiz; empty means the built-in quiz for `payoff`.
    #[serde(default)]
    pub quiz: Vec<QuizItem>,
    /// Instruction text; `{ASSOCIATE_LABEL}`, `{ROUNDS}` and the payoff
    /// placeholders are filled in. Empty means the built-in text.
    #[serde(default)]
    pub instructions: String,
    /// Opaque dialogue examples handed to agents' system prompts.
    #[serde(default)]
    pub example_dialogues: String,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub exec: ExecMode,
}

fn default_rounds() -> u32 {
    10
}
fn default_rate() -> Rate {
    Rate(60_000)
}
fn default_fee() -> Money {
    Money(1500)
}
fn default_bonus() -> Money {
    Money(1000)
}
fn default_battery() -> Vec<String> {
    QUESTIONNAIRE_SECTIONS.iter().map(|s| s.to_string()).collect()
}
fn default_bin_width() -> u32 {
    20
}
fn default_questionnaire_ms() -> u64 {
    20 * 60 * 1000
}

const DEFAULT_INSTRUCTIONS: &str = "\
You will play {ROUNDS} rounds of a decision game. In every round you are paired \
with a new associate, drawn from {ASSOCIATE_LABEL}, and you never meet the same \
associate twice.

Each round you and your associate first exchange two short messages, then each \
of you privately chooses A or B:
- both choose A: each earns {R} points;
- both choose B: each earns {P} points;
- one chooses A and the other B: the one who chose A earns {S} points and the \
one who chose B earns {T} points.

If you do not choose in time, a choice is made for you at random.";

impl SessionConfig {
    pub fn new(treatment: Treatment) -> SessionConfig {
        SessionConfig {
            treatment,
            rounds: default_rounds(),
            timers: StageTimers::default(),
            payoff: PayoffMatrix::default(),
            exchange_rate: default_rate(),
            show_up_fee: default_fee(),
            norm_bonus: default_bonus(),
            seed: 0,
            questionnaire_battery: default_battery(),
            norm_bin_width: default_bin_width(),
            questionnaire_ms: default_questionnaire_ms(),
            quiz: Vec::new(),
            instructions: String::new(),
            example_dialogues: String::new(),
            backend: BackendConfig::default(),
            exec: ExecMode::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<SessionConfig, OrchestratorError> {
        let config: SessionConfig =
            toml::from_str(text).map_err(|e| OrchestratorError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<SessionConfig, OrchestratorError> {
        SessionConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::ConfigInvalid(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if let Err(e) = self.timers.validate() {
            return bad(e.to_string());
        }
        if self.exchange_rate.micros() < 0 || self.show_up_fee.cents() < 0 || self.norm_bonus.cents() < 0 {
            return bad("exchange rate, fee and bonus must be non-negative".into());
        }
        if self.norm_bin_width == 0 || 100 % self.norm_bin_width != 0 {
            return bad(format!("norm_bin_width {} does not divide 100", self.norm_bin_width));
        }
        if self.questionnaire_ms == 0 {
            return bad("questionnaire_ms must be positive".into());
        }
        for (i, section) in self.questionnaire_battery.iter().enumerate() {
            if !QUESTIONNAIRE_SECTIONS.contains(&section.as_str()) {
                return bad(format!("unknown questionnaire section {section:?}"));
            }
            if self.questionnaire_battery[..i].contains(section) {
                return bad(format!("questionnaire section {section:?} listed twice"));
            }
        }
        if self
            .quiz
            .iter()
            .any(|q| !q.options.is_empty() && !q.options.contains(&q.answer))
        {
            return bad("a quiz answer is not among its options".into());
        }
        Ok(())
    }

    pub fn round_rules(&self) -> RoundRules {
        RoundRules {
            payoff: self.payoff,
            timers: self.timers,
            communication: self.treatment.communication,
        }
    }

    pub fn norm_bins(&self) -> Vec<NormBin> {
        (0..100 / self.norm_bin_width)
            .map(|i| NormBin {
                lo: i * self.norm_bin_width,
                hi: (i + 1) * self.norm_bin_width,
            })
            .collect()
    }

    pub fn asks(&self, section: &str) -> bool {
        self.questionnaire_battery.iter().any(|s| s == section)
    }

    pub fn quiz_items(&self) -> Vec<QuizItem> {
        if self.quiz.is_empty() {
            crate::quiz::default_quiz(&self.payoff)
        } else {
            self.quiz.clone()
        }
    }

    pub fn instruction_text(&self) -> String {
        let template = if self.instructions.is_empty() {
            DEFAULT_INSTRUCTIONS
        } else {
            &self.instructions
        };
        template
            .replace("{ROUNDS}", &self.rounds.to_string())
            .replace("{ASSOCIATE_LABEL}", self.treatment.associate_label())
            .replace("{R}", &self.payoff.mutual_coop().to_string())
            .replace("{P}", &self.payoff.mutual_defect().to_string())
            .replace("{S}", &self.payoff.sucker().to_string())
            .replace("{T}", &self.payoff.temptation().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hf() -> Treatment {
        Treatment {
            pairing: Pairing::HF,
            labeling: Labeling::Informed,
            communication: true,
        }
    }

    #[test]
    fn toml_defaults_and_roundtrip() {
        let c = SessionConfig::from_toml("[treatment]\npairing = \"HF\"\nlabeling = \"informed\"\n").unwrap();
        assert_eq!(c, SessionConfig::new(hf()));
        assert_eq!(c.timers.compose_ms, 60_000);
        assert_eq!(c.exchange_rate, Rate(60_000));
        assert_eq!(SessionConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        let base = "[treatment]\npairing = \"HH\"\nlabeling = \"informed\"\n";
        for extra in [
            "rounds = 0\n",
            "norm_bin_width = 30\n",
            "exchange_rate = -0.5\n",
            "questionnaire_battery = [\"mood\"]\n",
            "[timers]\ncompose_ms = 0\nread_ms = 1\ndecide_ms = 1\nresults_ms = 1\n",
            "[payoff]\nmutual_coop = 1\nmutual_defect = 2\nsucker = 0\ntemptation = 3\n",
        ] {
            let text = if extra.starts_with('[') {
                format!("{base}{extra}")
            } else {
                format!("{extra}{base}")
            };
            assert!(
                matches!(SessionConfig::from_toml(&text), Err(OrchestratorError::ConfigInvalid(_))),
                "{extra}"
            );
        }
    }

    #[test]
    fn labels_and_bins() {
        let mut t = hf();
        assert_eq!(t.associate_label(), "intelligent machines");
        t.labeling = Labeling::Uninformed;
        assert_eq!(t.associate_label(), "intelligent machines or humans");
        t.pairing = Pairing::HH;
        t.labeling = Labeling::Informed;
        assert_eq!(t.associate_label(), "humans");
        let bins = SessionConfig::new(t).norm_bins();
        assert_eq!(bins.len(), 5);
        assert_eq!((bins[4].lo, bins[4].hi), (80, 100));
        let text = SessionConfig::new(hf()).instruction_text();
        assert!(text.contains("intelligent machines") && text.contains("10 rounds") && text.contains("80 points"));
    }
}
