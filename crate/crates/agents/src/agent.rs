//! The agent driver: renders prompts, calls the backend, parses, and falls
//! back when output stays unusable.

use std::sync::Arc;

use dilemma_core::{Choice, PayoffMatrix};
use serde::{Deserialize, Serialize};

use crate::backend::{complete_with, Backend, CompletionLogEntry, CompletionRequest, RetryPolicy};
use crate::error::AgentError;
use crate::mock::Phase;
use crate::parse::{extract_bracketed_message, extract_decision};
use crate::persona::Persona;
use crate::prompts::PersonaPromptSet;
use crate::state::{AgentState, ConversationEntry, Speaker};

/// Whether an agent keeps its memory across rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentInstancing {
    /// One agent for the whole session; history accumulates.
    #[default]
    Persistent,
    /// Memory is wiped at the start of every round.
    FreshPerRound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    /// No `<…>` message after all parse retries; an empty message was sent.
    NoMessage,
    /// No decision after all parse retries; the caller draws a random choice.
    NoDecision,
    /// The backend never answered.
    BackendUnavailable,
}

/// Everything an agent writes to the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentLogRecord {
    Completion {
        agent_id: String,
        round_index: u32,
        phase: Phase,
        #[serde(flatten)]
        entry: CompletionLogEntry,
    },
    Fallback {
        agent_id: String,
        round_index: u32,
        phase: Phase,
        reason: FallbackReason,
        /// Last raw completion, if any arrived.
        raw: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageOutcome {
    pub text: String,
    pub fell_back: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    /// `None` when the agent failed to produce a decision; the caller applies
    /// the timeout rule.
    pub choice: Option<Choice>,
}

/// Request settings shared by all calls an agent makes.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestSettings {
    pub params: serde_json::Map<String, serde_json::Value>,
    pub timeout: std::time::Duration,
    /// Retries for both transport errors and unparseable output.
    pub max_retries: u32,
    pub retry_policy: RetryPolicy,
}

impl Default for RequestSettings {
    fn default() -> Self {
        RequestSettings {
            params: Default::default(),
            timeout: crate::backend::DEFAULT_TIMEOUT,
            max_retries: crate::backend::DEFAULT_MAX_RETRIES,
            retry_policy: RetryPolicy::default(),
        }
    }
}

/// A persona-driven player. An agent is mutated only by its owner.
#[derive(Clone, Debug)]
pub struct Agent {
    state: AgentState,
    system_prompt: String,
    prompts: Arc<PersonaPromptSet>,
    instancing: AgentInstancing,
    settings: RequestSettings,
    round_index: u32,
}

impl Agent {
    pub fn new(
        agent_id: impl Into<String>,
        persona: Persona,
        prompts: Arc<PersonaPromptSet>,
        example_dialogues: &str,
        payoff: &PayoffMatrix,
    ) -> Agent {
        let system_prompt = prompts.render_system_prompt(persona, example_dialogues, payoff);
        Agent {
            state: AgentState::new(agent_id, persona),
            system_prompt,
            prompts,
            instancing: AgentInstancing::default(),
            settings: RequestSettings::default(),
            round_index: 0,
        }
    }

    pub fn with_instancing(mut self, instancing: AgentInstancing) -> Self {
        self.instancing = instancing;
        self
    }

    pub fn with_settings(mut self, settings: RequestSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn id(&self) -> &str {
        self.state.agent_id()
    }

    pub fn persona(&self) -> Persona {
        self.state.persona()
    }

    pub fn system_prompt(&self) -> &str {
        &self.system_prompt
    }

    fn request(&self, prompt: String) -> CompletionRequest {
        CompletionRequest {
            system: self.system_prompt.clone(),
            prompt,
            params: self.settings.params.clone(),
            timeout: self.settings.timeout,
            max_retries: self.settings.max_retries,
            caller: Some(self.state.agent_id().to_string()),
        }
    }

    /// Calls the backend until `parse` accepts the output, at most
    /// `max_retries + 1` times. Returns the parsed value (if any) and the
    /// last raw text.
    fn ask<T>(
        &self,
        backend: &dyn Backend,
        phase: Phase,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, AgentError>,
        log: &mut Vec<AgentLogRecord>,
    ) -> (Option<T>, Option<String>, bool) {
        let request = self.request(prompt);
        let mut raw = None;
        for _ in 0..=self.settings.max_retries {
            let mut entries = Vec::new();
            let result = complete_with(
                backend,
                &request,
                self.settings.retry_policy,
                std::thread::sleep,
                &mut entries,
            );
            log.extend(entries.into_iter().map(|entry| AgentLogRecord::Completion {
                agent_id: self.id().to_string(),
                round_index: self.round_index,
                phase,
                entry,
            }));
            match result {
                Ok(text) => {
                    let parsed = parse(&text);
                    raw = Some(text);
                    if let Ok(value) = parsed {
                        return (Some(value), raw, false);
                    }
                }
                Err(_) => return (None, raw, true),
            }
        }
        (None, raw, false)
    }

    fn fallback(
        &self,
        phase: Phase,
        reason: FallbackReason,
        raw: Option<String>,
        log: &mut Vec<AgentLogRecord>,
    ) {
        tracing::warn!(agent = self.id(), round = self.round_index, ?phase, ?reason, "agent fallback");
        log.push(AgentLogRecord::Fallback {
            agent_id: self.id().to_string(),
            round_index: self.round_index,
            phase,
            reason,
            raw,
        });
    }

    fn message(
        &mut self,
        backend: &dyn Backend,
        phase: Phase,
        slot: u8,
        prompt: String,
        log: &mut Vec<AgentLogRecord>,
    ) -> MessageOutcome {
        let (text, raw, unavailable) = self.ask(backend, phase, prompt, extract_bracketed_message, log);
        let outcome = match text {
            Some(text) => MessageOutcome {
                text,
                fell_back: false,
            },
            None => {
                let reason = if unavailable {
                    FallbackReason::BackendUnavailable
                } else {
                    FallbackReason::NoMessage
                };
                self.fallback(phase, reason, raw, log);
                MessageOutcome {
                    text: String::new(),
                    fell_back: true,
                }
            }
        };
        self.state
            .push_message(ConversationEntry::new(Speaker::Own, slot, outcome.text.clone()));
        outcome
    }

    /// Starts `round_index` and composes the first message.
    pub fn first_message(
        &mut self,
        backend: &dyn Backend,
        round_index: u32,
        log: &mut Vec<AgentLogRecord>,
    ) -> MessageOutcome {
        if self.instancing == AgentInstancing::FreshPerRound {
            self.state.reset();
        }
        self.round_index = round_index;
        let prompt = self
            .prompts
            .render_first_message_prompt(round_index, self.persona());
        self.message(backend, Phase::FirstMessage, 1, prompt, log)
    }

    /// Delivers a message from the associate.
    pub fn receive(&mut self, slot: u8, text: impl Into<String>) {
        self.state
            .push_message(ConversationEntry::new(Speaker::Associate, slot, text));
    }

    fn slot_text(&self, speaker: Speaker, slot: u8) -> String {
        self.state
            .conversation()
            .iter()
            .find(|e| e.speaker == speaker && e.slot == slot)
            .map(|e| e.text.clone())
            .unwrap_or_default()
    }

    /// Composes the second message from both first messages.
    pub fn second_message(
        &mut self,
        backend: &dyn Backend,
        log: &mut Vec<AgentLogRecord>,
    ) -> MessageOutcome {
        let prompt = self.prompts.render_second_message_prompt(
            &self.slot_text(Speaker::Own, 1),
            &self.slot_text(Speaker::Associate, 1),
        );
        self.message(backend, Phase::SecondMessage, 2, prompt, log)
    }

    /// Makes this round's decision from the exchanged messages and history.
    pub fn decide(
        &mut self,
        backend: &dyn Backend,
        log: &mut Vec<AgentLogRecord>,
    ) -> DecisionOutcome {
        let mut transcript = self.state.conversation().to_vec();
        transcript.sort_by_key(|e| (e.slot, e.speaker == Speaker::Associate));
        let prompt = self
            .prompts
            .render_decision_prompt(&self.state, &transcript, self.round_index);
        let (choice, raw, unavailable) = self.ask(backend, Phase::Decision, prompt, extract_decision, log);
        if choice.is_none() {
            let reason = if unavailable {
                FallbackReason::BackendUnavailable
            } else {
                FallbackReason::NoDecision
            };
            self.fallback(Phase::Decision, reason, raw, log);
        }
        DecisionOutcome { choice }
    }

    /// Records the settled round.
    pub fn record_outcome(
        &mut self,
        own_choice: Choice,
        associate_choice: Choice,
        own_payoff: i64,
        associate_payoff: i64,
    ) -> Result<(), AgentError> {
        self.state.record(
            self.round_index,
            own_choice,
            associate_choice,
            own_payoff,
            associate_payoff,
        )
    }

    /// Prepares a round played without communication.
    pub fn begin_silent_round(&mut self, round_index: u32) {
        if self.instancing == AgentInstancing::FreshPerRound {
            self.state.reset();
        }
        self.round_index = round_index;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{MockBackend, MockConfig, ScriptedBackend};

    fn agent(persona: Persona) -> Agent {
        Agent::new(
            "agent-1",
            persona,
            Arc::new(PersonaPromptSet::builtin()),
            "",
            &PayoffMatrix::default(),
        )
    }

    fn completions(log: &[AgentLogRecord]) -> usize {
        log.iter()
            .filter(|r| matches!(r, AgentLogRecord::Completion { .. }))
            .count()
    }

    #[test]
    fn full_round_with_mock() {
        let backend = MockBackend::new(MockConfig {
            fair_breach_prob: 0.0,
            ..MockConfig::default()
        });
        let mut a = agent(Persona::Fair);
        let mut log = Vec::new();
        let m1 = a.first_message(&backend, 1, &mut log);
        assert!(!m1.fell_back);
        a.receive(1, "好");
        a.second_message(&backend, &mut log);
        a.receive(2, "好的");
        assert_eq!(a.decide(&backend, &mut log).choice, Some(Choice::A));
        a.record_outcome(Choice::A, Choice::B, 10, 80).unwrap();
        assert_eq!(completions(&log), 3);

        a.first_message(&backend, 2, &mut log);
        a.second_message(&backend, &mut log);
        assert_eq!(a.decide(&backend, &mut log).choice, Some(Choice::B));
        assert_eq!(completions(&log), 6);
    }

    #[test]
    fn unparseable_message_retries_then_falls_back_once() {
        let backend = ScriptedBackend::texts(["no brackets", "still none", "nope"]);
        let mut a = agent(Persona::Cooperative);
        let mut log = Vec::new();
        let out = a.first_message(&backend, 1, &mut log);
        assert_eq!(out.text, "");
        assert!(out.fell_back);
        assert_eq!(completions(&log), 3);
        let fallbacks: Vec<_> = log
            .iter()
            .filter(|r| matches!(r, AgentLogRecord::Fallback { .. }))
            .collect();
        assert_eq!(fallbacks.len(), 1);
        assert!(matches!(
            fallbacks[0],
            AgentLogRecord::Fallback {
                reason: FallbackReason::NoMessage,
                raw: Some(r),
                ..
            } if r == "nope"
        ));
    }

    #[test]
    fn decision_recovers_on_retry() {
        let backend = ScriptedBackend::texts(["thinking...", "I DECIDE TO CHOOSE [B]"]);
        let mut a = agent(Persona::Selfish);
        let mut log = Vec::new();
        a.begin_silent_round(1);
        assert_eq!(a.decide(&backend, &mut log).choice, Some(Choice::B));
        assert_eq!(completions(&log), 2);
        assert!(!log.iter().any(|r| matches!(r, AgentLogRecord::Fallback { .. })));
    }

    #[test]
    fn fresh_per_round_forgets() {
        let backend = MockBackend::new(MockConfig::default());
        let mut a = agent(Persona::Fair).with_instancing(AgentInstancing::FreshPerRound);
        let mut log = Vec::new();
        a.first_message(&backend, 1, &mut log);
        a.record_outcome(Choice::A, Choice::B, 10, 80).unwrap();
        a.first_message(&backend, 2, &mut log);
        assert!(a.state().history().is_empty());
        a.second_message(&backend, &mut log);
        assert_eq!(a.decide(&backend, &mut log).choice, Some(Choice::A));
    }
}
