//! Session channel protocol: one JSON object per line, each carrying the
//! schema version `v` and a `type` tag. Nothing sent to a participant names
//! another participant or reveals earlier pairings.

use dilemma_core::{Choice, Stage};
use serde::{Deserialize, Serialize};

use crate::money::Money;
use crate::questionnaire::QuestionnaireAnswers;

pub const PROTOCOL_VERSION: u32 = 1;

/// The screen a participant should be on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientStage {
    Quiz,
    Waiting,
    Msg1Compose,
    Msg1Read,
    Msg2Compose,
    Msg2Read,
    Decide,
    Results,
    Questionnaire,
    Finished,
}

impl From<Stage> for ClientStage {
    fn from(stage: Stage) -> Self {
        match stage {
            Stage::Msg1Compose => ClientStage::Msg1Compose,
            Stage::Msg1Read => ClientStage::Msg1Read,
            Stage::Msg2Compose => ClientStage::Msg2Compose,
            Stage::Msg2Read => ClientStage::Msg2Read,
            Stage::Decide => ClientStage::Decide,
            Stage::Results => ClientStage::Results,
            Stage::Done => ClientStage::Waiting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub question: String,
    pub options: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub text: String,
    /// `likert` (-3..=3), `bin`, `integer`, `slider` or `text`.
    pub scale: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StagePayload {
    None,
    Quiz {
        instructions: String,
        items: Vec<QuizQuestion>,
        /// Attempts made so far; a retake follows a failed attempt.
        attempts: u32,
    },
    Compose {
        slot: u8,
        associate_label: String,
    },
    Decide {
        options: [Choice; 2],
    },
    Questionnaire {
        pages: u32,
    },
    Finished {
        total_points: i64,
        payout: Money,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    StageEnter {
        stage: ClientStage,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        round: Option<u32>,
        /// Server clock, milliseconds since the Unix epoch.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        deadline_epoch_ms: Option<u64>,
        payload: StagePayload,
    },
    MessageDelivered {
        round: u32,
        slot: u8,
        text: String,
    },
    RoundResult {
        round: u32,
        own_choice: Choice,
        own_payoff: i64,
        associate_choice: Choice,
        associate_payoff: i64,
        total_points: i64,
    },
    QuestionnairePage {
        page: u32,
        pages: u32,
        section: String,
        items: Vec<QuestionItem>,
    },
    Error {
        code: String,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Join { token: String },
    QuizAnswers { answers: Vec<String> },
    MessageText { text: String },
    Choice { choice: Choice },
    QuestionnaireAnswers { answers: QuestionnaireAnswers },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed line: {0}")]
    Malformed(String),
}

fn encode<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Envelope {
        v: PROTOCOL_VERSION,
        body,
    })
    .expect("protocol messages serialize")
}

fn decode<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, ProtocolError> {
    #[derive(Deserialize)]
    struct Version {
        v: u32,
    }
    let version: Version =
        serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if version.v != PROTOCOL_VERSION {
        return Err(ProtocolError::UnsupportedVersion(version.v));
    }
    let envelope: Envelope<T> =
        serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    Ok(envelope.body)
}

impl ServerMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(line: &str) -> Result<ServerMessage, ProtocolError> {
        decode(line)
    }
}

impl ClientMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(line: &str) -> Result<ClientMessage, ProtocolError> {
        decode(line)
    }
}
