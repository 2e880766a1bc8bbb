//! Treatment labels shared by the session service and the analysis tools.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Who a human is paired with: another human, or an agent of one persona.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pairing {
    HH,
    HF,
    HC,
    HS,
}

impl Pairing {
    pub const ALL: [Pairing; 4] = [Pairing::HH, Pairing::HF, Pairing::HC, Pairing::HS];

    pub fn is_human_agent(self) -> bool {
        self != Pairing::HH
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pairing::HH => "HH",
            Pairing::HF => "HF",
            Pairing::HC => "HC",
            Pairing::HS => "HS",
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "HH" => Ok(Pairing::HH),
            "HF" => Ok(Pairing::HF),
            "HC" => Ok(Pairing::HC),
            "HS" => Ok(Pairing::HS),
            other => Err(format!("unknown pairing {other:?}")),
        }
    }
}

/// What participants are told about their associates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    Informed,
    Uninformed,
}

impl Labeling {
    pub fn as_str(self) -> &'static str {
        match self {
            Labeling::Informed => "informed",
            Labeling::Uninformed => "uninformed",
        }
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_parsing() {
        assert_eq!("h-f".parse::<Pairing>().unwrap(), Pairing::HF);
        assert!("HX".parse::<Pairing>().is_err());
        assert!(!Pairing::HH.is_human_agent());
    }
}
