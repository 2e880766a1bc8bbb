use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AgentError;

/// The three agent personas. They differ only in their role-play prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    Cooperative,
    Fair,
    Selfish,
}

impl Persona {
    pub const ALL: [Persona; 3] = [Persona::Cooperative, Persona::Fair, Persona::Selfish];

    /// Value substituted for `{PERSONA_NAME}`.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Persona::Cooperative => "COOPERATIVE",
            Persona::Fair => "FAIR-MINDED",
            Persona::Selfish => "INDIVIDUALISTIC",
        }
    }

    /// Short lowercase id used on the command line and in data files.
    pub fn key(self) -> &'static str {
        match self {
            Persona::Cooperative => "cooperative",
            Persona::Fair => "fair",
            Persona::Selfish => "selfish",
        }
    }

    /// Recognises the persona from a rendered system prompt.
    pub fn detect(system_prompt: &str) -> Option<Persona> {
        Persona::ALL
            .into_iter()
            .find(|p| system_prompt.contains(&format!("{} human", p.prompt_name())))
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Persona {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cooperative" | "coop" | "c" => Ok(Persona::Cooperative),
            "fair" | "fair-minded" | "f" => Ok(Persona::Fair),
            "selfish" | "individualistic" | "s" => Ok(Persona::Selfish),
            other => Err(AgentError::UnknownPersona(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for p in Persona::ALL {
            assert_eq!(p.key().parse::<Persona>().unwrap(), p);
        }
        assert!("greedy".parse::<Persona>().is_err());
    }

    #[test]
    fn detect_from_roleplay_phrase() {
        assert_eq!(
            Persona::detect("... You are a FAIR-MINDED human, and ..."),
            Some(Persona::Fair)
        );
        assert_eq!(
            Persona::detect("You are an INDIVIDUALISTIC human"),
            Some(Persona::Selfish)
        );
        assert_eq!(Persona::detect("nothing here"), None);
    }
}
