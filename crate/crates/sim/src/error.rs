use dilemma_core::ScheduleError;
use thiserror::Error;

use crate::matchup::ResumeCursor;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("group size must be at least 1")]
    EmptyGroup,
    #[error("backend {backend} unavailable at repeat {}, round {}; {completed} records kept", cursor.repeat, cursor.round)]
    BackendUnavailable {
        backend: String,
        cursor: ResumeCursor,
        completed: usize,
    },
    #[error("checkpoint does not belong to matchup {expected}: {problem}")]
    CheckpointMismatch { expected: String, problem: String },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint record: {0}")]
    Json(#[from] serde_json::Error),
}
