use dilemma_core::{GameError, ScheduleError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown join token")]
    UnknownToken,
    #[error("unknown participant {0:?}")]
    UnknownParticipant(String),
    #[error("participant {0:?} is disconnected")]
    ParticipantDisconnected(String),
    #[error("{what} is not accepted now")]
    NotAccepted { what: &'static str },
    #[error(transparent)]
    Rejected(#[from] GameError),
    #[error("invalid questionnaire: {0}")]
    QuestionnaireInvalid(String),
    #[error("session {0:?} is not complete")]
    SessionIncomplete(String),
    #[error("event log does not replay: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl OrchestratorError {
    /// Short machine-readable code for the wire protocol.
    pub fn code(&self) -> &'static str {
        match self {
            OrchestratorError::ConfigInvalid(_) => "config_invalid",
            OrchestratorError::UnknownToken => "unknown_token",
            OrchestratorError::UnknownParticipant(_) => "unknown_participant",
            OrchestratorError::ParticipantDisconnected(_) => "disconnected",
            OrchestratorError::NotAccepted { .. } => "not_accepted",
            OrchestratorError::Rejected(GameError::StageClosed { .. }) => "stage_closed",
            OrchestratorError::Rejected(GameError::DuplicateSubmission { .. }) => "duplicate",
            OrchestratorError::Rejected(_) => "illegal",
            OrchestratorError::QuestionnaireInvalid(_) => "questionnaire_invalid",
            OrchestratorError::SessionIncomplete(_) => "incomplete",
            OrchestratorError::ReplayMismatch(_) => "replay_mismatch",
            OrchestratorError::Schedule(_) => "schedule",
            OrchestratorError::Io(_) | OrchestratorError::Json(_) | OrchestratorError::Csv(_) => "internal",
        }
    }
}
