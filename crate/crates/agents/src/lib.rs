//! Persona-driven LLM players for the repeated dilemma game: prompt
//! rendering, completion backends (hosted and mock) and output parsing.

pub mod agent;
pub mod backend;
pub mod error;
pub mod http;
pub mod mock;
pub mod parse;
pub mod persona;
pub mod prompts;
pub mod state;

pub use agent::{
    Agent, AgentInstancing, AgentLogRecord, DecisionOutcome, FallbackReason, MessageOutcome,
    RequestSettings,
};
pub use backend::{
    complete, complete_with, Backend, CompletionLogEntry, CompletionRequest, RetryPolicy,
};
pub use error::{AgentError, TransportError};
pub use http::ChatCompletionsBackend;
pub use mock::{mock_policy_step, MockBackend, MockConfig, MockContext, Phase, ScriptedBackend};
pub use parse::{extract_bracketed_message, extract_decision, format_decision};
pub use persona::Persona;
pub use prompts::{PersonaPromptSet, Template, DECISION_CONTRACT};
pub use state::{AgentState, ConversationEntry, RoundRecord, Speaker};
