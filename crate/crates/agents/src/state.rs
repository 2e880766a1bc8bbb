use dilemma_core::Choice;
use serde::{Deserialize, Serialize};

use crate::error::AgentError;
use crate::persona::Persona;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Own,
    Associate,
}

/// One message exchanged in a round, seen from the agent's side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationEntry {
    pub speaker: Speaker,
    pub slot: u8,
    pub text: String,
}

impl ConversationEntry {
    pub fn new(speaker: Speaker, slot: u8, text: impl Into<String>) -> Self {
        ConversationEntry {
            speaker,
            slot,
            text: text.into(),
        }
    }

    /// How the message is embedded in prompts.
    pub fn transcript_line(&self) -> String {
        match self.speaker {
            Speaker::Own => format!("You: {}", self.text),
            Speaker::Associate => format!("Your associate: {}", self.text),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub own_choice: Choice,
    pub associate_choice: Choice,
    pub own_payoff: i64,
    pub associate_payoff: i64,
}

/// What an agent remembers across rounds: its persona, the outcome of every
/// round it has played and its running total.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    agent_id: String,
    persona: Persona,
    history: Vec<RoundRecord>,
    total_payoff: i64,
    conversation: Vec<ConversationEntry>,
}

impl AgentState {
    pub fn new(agent_id: impl Into<String>, persona: Persona) -> Self {
        AgentState {
            agent_id: agent_id.into(),
            persona,
            history: Vec::new(),
            total_payoff: 0,
            conversation: Vec::new(),
        }
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn persona(&self) -> Persona {
        self.persona
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn total_payoff(&self) -> i64 {
        self.total_payoff
    }

    pub fn last_round(&self) -> Option<&RoundRecord> {
        self.history.last()
    }

    /// Messages of the round in progress.
    pub fn conversation(&self) -> &[ConversationEntry] {
        &self.conversation
    }

    pub fn push_message(&mut self, entry: ConversationEntry) {
        self.conversation.push(entry);
    }

    /// Records a settled round. Rounds must be recorded in increasing order;
    /// the current conversation buffer is cleared.
    pub fn record(
        &mut self,
        round_index: u32,
        own_choice: Choice,
        associate_choice: Choice,
        own_payoff: i64,
        associate_payoff: i64,
    ) -> Result<(), AgentError> {
        if let Some(last) = self.history.last() {
            if round_index <= last.round_index {
                return Err(AgentError::RoundOutOfOrder {
                    round: round_index,
                    last: last.round_index,
                });
            }
        }
        self.history.push(RoundRecord {
            round_index,
            own_choice,
            associate_choice,
            own_payoff,
            associate_payoff,
        });
        self.total_payoff += own_payoff;
        self.conversation.clear();
        Ok(())
    }

    /// Drops all memory, as for an agent instantiated fresh every round.
    pub fn reset(&mut self) {
        self.history.clear();
        self.total_payoff = 0;
        self.conversation.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_ordering() {
        let mut s = AgentState::new("x", Persona::Selfish);
        s.record(1, Choice::B, Choice::A, 80, 10).unwrap();
        s.record(3, Choice::B, Choice::B, 40, 40).unwrap();
        assert_eq!(s.total_payoff(), 120);
        assert_eq!(
            s.record(3, Choice::A, Choice::A, 70, 70),
            Err(AgentError::RoundOutOfOrder { round: 3, last: 3 })
        );
        assert_eq!(s.history().len(), 2);
        s.reset();
        assert_eq!(s.total_payoff(), 0);
    }

    #[test]
    fn transcript_lines() {
        assert_eq!(
            ConversationEntry::new(Speaker::Associate, 2, "ok").transcript_line(),
            "Your associate: ok"
        );
    }
}
