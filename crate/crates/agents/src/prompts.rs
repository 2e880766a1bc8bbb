//! Prompt templates and rendering.
//!
//! Templates are plain-text assets with `{NAME}` placeholders. The built-in
//! set is compiled in from `templates/`; a directory with files of the same
//! names can override any of them. Every template is checked at load time
//! against the placeholders its renderer supplies, so rendering itself cannot
//! leave a placeholder unresolved.

use std::collections::BTreeSet;
use std::path::Path;

use dilemma_core::PayoffMatrix;

use crate::error::AgentError;
use crate::persona::Persona;
use crate::state::{AgentState, ConversationEntry, Speaker};

pub const DECISION_CONTRACT: &str = "I DECIDE TO CHOOSE []";

const SYSTEM: &str = include_str!("../templates/system.txt");
const ROLEPLAY_COOPERATIVE: &str = include_str!("../templates/roleplay_cooperative.txt");
const ROLEPLAY_FAIR: &str = include_str!("../templates/roleplay_fair.txt");
const ROLEPLAY_SELFISH: &str = include_str!("../templates/roleplay_selfish.txt");
const FIRST_MESSAGE: &str = include_str!("../templates/first_message.txt");
const SECOND_MESSAGE: &str = include_str!("../templates/second_message.txt");
const DECISION: &str = include_str!("../templates/decision.txt");
const DECISION_HISTORY_LINE: &str = include_str!("../templates/decision_history_line.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// A parsed template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    name: String,
    segments: Vec<Segment>,
}

fn is_placeholder_char(c: char) -> bool {
    c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_' || c == '\''
}

impl Template {
    /// Parses `source`, dropping one trailing newline so assets can end with
    /// a POSIX newline.
    pub fn parse(name: &str, source: &str) -> Template {
        let source = source.strip_suffix('\n').unwrap_or(source);
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut rest = source;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after.find('}');
            match close {
                Some(close)
                    if close > 0 && after[..close].chars().all(is_placeholder_char) =>
                {
                    text.push_str(&rest[..open]);
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(Segment::Slot(after[..close].to_string()));
                    rest = &after[close + 1..];
                }
                _ => {
                    text.push_str(&rest[..=open]);
                    rest = after;
                }
            }
        }
        text.push_str(rest);
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Template {
            name: name.to_string(),
            segments,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Literal text with placeholders kept as `{NAME}`.
    pub fn source(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Text(t) => t.clone(),
                Segment::Slot(n) => format!("{{{n}}}"),
            })
            .collect()
    }

    fn check(&self, allowed: &[&str]) -> Result<(), AgentError> {
        for slot in self.placeholders() {
            if !allowed.contains(&slot) {
                return Err(AgentError::Template {
                    template: self.name.clone(),
                    problem: format!("unknown placeholder {{{slot}}}"),
                });
            }
        }
        Ok(())
    }

    /// Substitutes every placeholder in one pass; substituted values are not
    /// rescanned.
    fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let value = vars
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .unwrap_or_else(|| {
                            panic!("template {} checked without {{{name}}}", self.name)
                        });
                    out.push_str(value);
                }
            }
        }
        out
    }
}

const SYSTEM_SLOTS: &[&str] = &[
    "CHINESE_EXAMPLE",
    "ROLEPLAY_PROMPT",
    "MUTUAL_COOP",
    "MUTUAL_DEFECT",
    "SUCKER",
    "TEMPTATION",
];
const FIRST_SLOTS: &[&str] = &["ROUND_NUMBER", "PERSONA_NAME"];
const SECOND_SLOTS: &[&str] = &["YOUR_FIRST_MESSAGE", "YOUR_ASSOCIATE'S_FIRST_MESSAGE"];
const DECISION_SLOTS: &[&str] = &[
    "COMMUNICATION_MESSAGES",
    "HISTORY",
    "PLAYER_TOTAL_PAYOFF",
    "ROUND_NUMBER",
    "PERSONA_NAME",
];
const HISTORY_SLOTS: &[&str] = &[
    "ROUND_NUMBER",
    "PLAYER1_CHOICE",
    "PLAYER2_CHOICE",
    "PLAYER1_PAYOFF",
    "PLAYER2_PAYOFF",
];

/// The complete prompt pipeline shared by all personas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersonaPromptSet {
    system: Template,
    roleplay: [Template; 3],
    first_message: Template,
    second_message: Template,
    decision: Template,
    history_line: Template,
}

impl Default for PersonaPromptSet {
    fn default() -> Self {
        PersonaPromptSet::builtin()
    }
}

impl PersonaPromptSet {
    pub fn builtin() -> PersonaPromptSet {
        PersonaPromptSet::from_sources(|name| {
            Some(
                match name {
                    "system" => SYSTEM,
                    "roleplay_cooperative" => ROLEPLAY_COOPERATIVE,
                    "roleplay_fair" => ROLEPLAY_FAIR,
                    "roleplay_selfish" => ROLEPLAY_SELFISH,
                    "first_message" => FIRST_MESSAGE,
                    "second_message" => SECOND_MESSAGE,
                    "decision" => DECISION,
                    "decision_history_line" => DECISION_HISTORY_LINE,
                    _ => return None,
                }
                .to_string(),
            )
        })
        .expect("built-in templates are valid")
    }

    /// Loads `<name>.txt` files from `dir`; any file that is absent falls back
    /// to the built-in asset.
    pub fn from_dir(dir: &Path) -> Result<PersonaPromptSet, AgentError> {
        let builtin = PersonaPromptSet::builtin();
        PersonaPromptSet::from_sources(|name| {
            match std::fs::read_to_string(dir.join(format!("{name}.txt"))) {
                Ok(text) => Some(text),
                Err(_) => builtin.template(name).map(|t| t.source()),
            }
        })
    }

    fn template(&self, name: &str) -> Option<&Template> {
        Some(match name {
            "system" => &self.system,
            "roleplay_cooperative" => &self.roleplay[0],
            "roleplay_fair" => &self.roleplay[1],
            "roleplay_selfish" => &self.roleplay[2],
            "first_message" => &self.first_message,
            "second_message" => &self.second_message,
            "decision" => &self.decision,
            "decision_history_line" => &self.history_line,
            _ => return None,
        })
    }

    fn from_sources(
        mut load: impl FnMut(&str) -> Option<String>,
    ) -> Result<PersonaPromptSet, AgentError> {
        let mut get = |name: &str, allowed: &[&str]| -> Result<Template, AgentError> {
            let source = load(name).ok_or_else(|| AgentError::Template {
                template: name.to_string(),
                problem: "missing".into(),
            })?;
            let template = Template::parse(name, &source);
            template.check(allowed)?;
            Ok(template)
        };
        let set = PersonaPromptSet {
            system: get("system", SYSTEM_SLOTS)?,
            roleplay: [
                get("roleplay_cooperative", &[])?,
                get("roleplay_fair", &[])?,
                get("roleplay_selfish", &[])?,
            ],
            first_message: get("first_message", FIRST_SLOTS)?,
            second_message: get("second_message", SECOND_SLOTS)?,
            decision: get("decision", DECISION_SLOTS)?,
            history_line: get("decision_history_line", HISTORY_SLOTS)?,
        };
        if !set.decision.source().contains(DECISION_CONTRACT) {
            return Err(AgentError::Template {
                template: "decision".into(),
                problem: format!("must contain the completion contract {DECISION_CONTRACT:?}"),
            });
        }
        Ok(set)
    }

    pub fn roleplay_text(&self, persona: Persona) -> String {
        let idx = match persona {
            Persona::Cooperative => 0,
            Persona::Fair => 1,
            Persona::Selfish => 2,
        };
        self.roleplay[idx].render(&[])
    }

    pub fn render_system_prompt(
        &self,
        persona: Persona,
        example_dialogues: &str,
        payoff: &PayoffMatrix,
    ) -> String {
        let roleplay = self.roleplay_text(persona);
        let (r, p, s, t) = (
            payoff.mutual_coop().to_string(),
            payoff.mutual_defect().to_string(),
            payoff.sucker().to_string(),
            payoff.temptation().to_string(),
        );
        self.system.render(&[
            ("CHINESE_EXAMPLE", example_dialogues),
            ("ROLEPLAY_PROMPT", &roleplay),
            ("MUTUAL_COOP", &r),
            ("MUTUAL_DEFECT", &p),
            ("SUCKER", &s),
            ("TEMPTATION", &t),
        ])
    }

    pub fn render_first_message_prompt(&self, round_index: u32, persona: Persona) -> String {
        self.first_message.render(&[
            ("ROUND_NUMBER", &round_index.to_string()),
            ("PERSONA_NAME", persona.prompt_name()),
        ])
    }

    pub fn render_second_message_prompt(&self, own_first: &str, associate_first: &str) -> String {
        let own = ConversationEntry::new(Speaker::Own, 1, own_first).transcript_line();
        let assoc =
            ConversationEntry::new(Speaker::Associate, 1, associate_first).transcript_line();
        self.second_message.render(&[
            ("YOUR_FIRST_MESSAGE", &own),
            ("YOUR_ASSOCIATE'S_FIRST_MESSAGE", &assoc),
        ])
    }

    /// Decision prompt for `round_index`, embedding this round's messages and
    /// one history line per earlier round the agent played.
    pub fn render_decision_prompt(
        &self,
        state: &AgentState,
        round_messages: &[ConversationEntry],
        round_index: u32,
    ) -> String {
        let transcript = round_messages
            .iter()
            .map(ConversationEntry::transcript_line)
            .collect::<Vec<_>>()
            .join("\n");
        let mut history = String::new();
        for record in state.history() {
            history.push_str(&self.history_line.render(&[
                ("ROUND_NUMBER", &record.round_index.to_string()),
                ("PLAYER1_CHOICE", record.own_choice.as_str()),
                ("PLAYER2_CHOICE", record.associate_choice.as_str()),
                ("PLAYER1_PAYOFF", &record.own_payoff.to_string()),
                ("PLAYER2_PAYOFF", &record.associate_payoff.to_string()),
            ]));
            history.push('\n');
        }
        if !history.is_empty() {
            history.push('\n');
        }
        self.decision.render(&[
            ("COMMUNICATION_MESSAGES", &transcript),
            ("HISTORY", &history),
            ("PLAYER_TOTAL_PAYOFF", &state.total_payoff().to_string()),
            ("ROUND_NUMBER", &round_index.to_string()),
            ("PERSONA_NAME", state.persona().prompt_name()),
        ])
    }
}
