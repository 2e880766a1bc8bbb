//! Session service for timed, repeated two-player dilemma experiments
//! between humans and language-model agents.
//!
//! [`Session`] is a pure state machine fed with inputs and the current
//! time; [`server::serve`] puts it on a TCP socket and
//! [`simulate::run_simulated`] drives it with scripted participants on a
//! mock clock. Everything a session does is written to an append-only
//! event log, from which [`replay`] rebuilds results and
//! [`export::export_dataset`] produces the analysis tables.

pub mod config;
pub mod error;
pub mod event;
pub mod export;
pub mod money;
pub mod payout;
pub mod protocol;
pub mod questionnaire;
pub mod quiz;
pub mod result;
pub mod server;
pub mod session;
pub mod simulate;

pub use config::{BackendConfig, SessionConfig, Treatment};
pub use error::OrchestratorError;
pub use event::{read_events, write_events, Event, EventRecord, Fallback};
pub use export::{export_dataset, export_results, DatasetTables, SessionStore};
pub use money::{Money, Rate};
pub use payout::{compute_payout, grade_norm_estimate, NormBin};
pub use protocol::{ClientMessage, ClientStage, ServerMessage, StagePayload, PROTOCOL_VERSION};
pub use questionnaire::{QuestionnaireAnswers, QuestionnaireResponse};
pub use quiz::{quiz_gate, QuizItem, QuizOutcome};
pub use result::{replay, InteractionRecord, ParticipantResult, SessionResult};
pub use session::{Input, Outbound, Participant, Session, SessionPhase};
pub use simulate::{numbered_roster, run_simulated, HumanPolicy, ScriptedClient, SimulatedRun, SIM_EPOCH_MS};

/// Deterministic 64-bit mixing of several words (SplitMix64 finalizer).
pub(crate) fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        h ^= w;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}
