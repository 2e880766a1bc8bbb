use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GameError;

/// One of the two options of the dilemma.
///
/// `A` is cooperation and `B` is defection, but only the neutral labels are
/// ever shown to players or agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub const ALL: [Choice; 2] = [Choice::A, Choice::B];

    pub fn is_cooperation(self) -> bool {
        self == Choice::A
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Choice::A => "A",
            Choice::B => "B",
        }
    }

    /// Uniform draw, used when a decision is missing at the deadline.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Choice {
        if rng.random_bool(0.5) {
            Choice::A
        } else {
            Choice::B
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Choice {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Choice::A),
            "B" | "b" => Ok(Choice::B),
            other => Err(GameError::UnknownChoice(other.to_string())),
        }
    }
}

/// Points awarded for each outcome cell, from the point of view of the row player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPayoffMatrix")]
pub struct PayoffMatrix {
    mutual_coop: i64,
    mutual_defect: i64,
    sucker: i64,
    temptation: i64,
}

#[derive(Deserialize)]
struct RawPayoffMatrix {
    mutual_coop: i64,
    mutual_defect: i64,
    sucker: i64,
    temptation: i64,
}

impl TryFrom<RawPayoffMatrix> for PayoffMatrix {
    type Error = GameError;

    fn try_from(raw: RawPayoffMatrix) -> Result<Self, Self::Error> {
        PayoffMatrix::new(raw.mutual_coop, raw.mutual_defect, raw.sucker, raw.temptation)
    }
}

impl PayoffMatrix {
    /// Builds a matrix, rejecting anything that is not a prisoner's dilemma
    /// (`temptation > mutual_coop > mutual_defect > sucker`).
    pub fn new(
        mutual_coop: i64,
        mutual_defect: i64,
        sucker: i64,
        temptation: i64,
    ) -> Result<Self, GameError> {
        if !(temptation > mutual_coop && mutual_coop > mutual_defect && mutual_defect > sucker) {
            return Err(GameError::InvalidPayoffOrdering {
                mutual_coop,
                mutual_defect,
                sucker,
                temptation,
            });
        }
        Ok(PayoffMatrix {
            mutual_coop,
            mutual_defect,
            sucker,
            temptation,
        })
    }

    pub fn mutual_coop(&self) -> i64 {
        self.mutual_coop
    }

    pub fn mutual_defect(&self) -> i64 {
        self.mutual_defect
    }

    pub fn sucker(&self) -> i64 {
        self.sucker
    }

    pub fn temptation(&self) -> i64 {
        self.temptation
    }

    /// Largest total a player can collect over `rounds` rounds.
    pub fn max_total(&self, rounds: u32) -> i64 {
        self.temptation * i64::from(rounds)
    }
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        PayoffMatrix {
            mutual_coop: 70,
            mutual_defect: 40,
            sucker: 10,
            temptation: 80,
        }
    }
}

/// Points for the two players given their choices.
pub fn score_round(first: Choice, second: Choice, matrix: &PayoffMatrix) -> (i64, i64) {
    match (first, second) {
        (Choice::A, Choice::A) => (matrix.mutual_coop, matrix.mutual_coop),
        (Choice::B, Choice::B) => (matrix.mutual_defect, matrix.mutual_defect),
        (Choice::A, Choice::B) => (matrix.sucker, matrix.temptation),
        (Choice::B, Choice::A) => (matrix.temptation, matrix.sucker),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_cells() {
        let m = PayoffMatrix::default();
        assert_eq!(score_round(Choice::A, Choice::A, &m), (70, 70));
        assert_eq!(score_round(Choice::B, Choice::B, &m), (40, 40));
        assert_eq!(score_round(Choice::A, Choice::B, &m), (10, 80));
        assert_eq!(score_round(Choice::B, Choice::A, &m), (80, 10));
    }

    #[test]
    fn rejects_non_dilemma() {
        assert!(PayoffMatrix::new(70, 40, 10, 80).is_ok());
        assert!(matches!(
            PayoffMatrix::new(80, 40, 10, 70),
            Err(GameError::InvalidPayoffOrdering { .. })
        ));
        assert!(PayoffMatrix::new(70, 70, 10, 80).is_err());
        assert!(PayoffMatrix::new(70, 40, 40, 80).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let ok: PayoffMatrix = serde_json::from_str(
            r#"{"mutual_coop":3,"mutual_defect":1,"sucker":0,"temptation":5}"#,
        )
        .unwrap();
        assert_eq!(ok.temptation(), 5);
        let bad = serde_json::from_str::<PayoffMatrix>(
            r#"{"mutual_coop":3,"mutual_defect":1,"sucker":2,"temptation":5}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn choice_parsing() {
        assert_eq!("A".parse::<Choice>().unwrap(), Choice::A);
        assert_eq!(" b ".parse::<Choice>().unwrap(), Choice::B);
        assert!("C".parse::<Choice>().is_err());
    }

    fn any_choice() -> impl Strategy<Value = Choice> {
        prop_oneof![Just(Choice::A), Just(Choice::B)]
    }

    proptest! {
        #[test]
        fn exchange_symmetric(x in any_choice(), y in any_choice(), s in -50i64..50, gap in 1i64..20) {
            let m = PayoffMatrix::new(s + 2 * gap, s + gap, s, s + 3 * gap).unwrap();
            let (a, b) = score_round(x, y, &m);
            let (c, d) = score_round(y, x, &m);
            prop_assert_eq!((a, b), (d, c));
        }
    }
}
