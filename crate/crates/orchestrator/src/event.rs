//! The append-only session event log. Each line is one [`EventRecord`];
//! sequence numbers start at 0 and increase by one.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dilemma_agents::{FallbackReason, Persona, Phase};
use dilemma_core::{Choice, Stage};
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::OrchestratorError;
use crate::money::Money;
use crate::protocol::ClientStage;
use crate::questionnaire::QuestionnaireResponse;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: String,
    pub persona: Persona,
    /// The human this agent is paired with for the whole session.
    pub partner: String,
    pub system_prompt: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fallback {
    EmptyMessage,
    RandomChoice { choice: Choice },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        config: SessionConfig,
        participants: Vec<String>,
        agents: Vec<AgentInfo>,
    },
    ParticipantJoined {
        participant: String,
    },
    ParticipantDisconnected {
        participant: String,
    },
    QuizAttempt {
        participant: String,
        attempt: u32,
        passed: bool,
    },
    /// A participant's screen changed; `pair` is set for round stages.
    StageEnter {
        stage: ClientStage,
        round: Option<u32>,
        pair: Option<usize>,
        parties: Vec<String>,
        deadline_ms: Option<u64>,
    },
    MessageSent {
        round: u32,
        pair: usize,
        sender: String,
        slot: u8,
        text: String,
        timed_out: bool,
    },
    MessageDelivered {
        round: u32,
        pair: usize,
        recipient: String,
        slot: u8,
    },
    ChoiceSubmitted {
        round: u32,
        pair: usize,
        party: String,
        choice: Choice,
    },
    TimeoutFallback {
        round: u32,
        pair: usize,
        party: String,
        stage: Stage,
        fallback: Fallback,
    },
    RoundResult {
        round: u32,
        pair: usize,
        parties: [String; 2],
        choices: [Choice; 2],
        payoffs: [i64; 2],
    },
    LlmRequest {
        agent: String,
        round: u32,
        phase: Phase,
        attempt: u32,
        prompt: String,
    },
    LlmResponse {
        agent: String,
        round: u32,
        phase: Phase,
        attempt: u32,
        response: Option<String>,
        error: Option<String>,
    },
    AgentFallback {
        agent: String,
        round: u32,
        phase: Phase,
        reason: FallbackReason,
    },
    QuestionnaireSubmitted {
        response: QuestionnaireResponse,
    },
    PayoutComputed {
        participant: String,
        total_points: i64,
        realized_norm_rate: Option<f64>,
        correct_norm_guesses: u32,
        payout: Money,
    },
    SessionFinished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    /// Session clock, milliseconds since the Unix epoch.
    pub at_ms: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<(), OrchestratorError> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in events {
        writeln!(w, "{}", e.to_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn append_events(path: &Path, events: &[EventRecord]) -> Result<(), OrchestratorError> {
    let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for e in events {
        writeln!(w, "{}", e.to_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>, OrchestratorError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn events_to_jsonl(events: &[EventRecord]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_line());
        s.push('\n');
    }
    s
}
