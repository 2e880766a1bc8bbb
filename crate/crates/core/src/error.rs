use thiserror::Error;

use crate::round::Stage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error(
        "payoffs must satisfy temptation > mutual_coop > mutual_defect > sucker \
         (got T={temptation}, R={mutual_coop}, P={mutual_defect}, S={sucker})"
    )]
    InvalidPayoffOrdering {
        mutual_coop: i64,
        mutual_defect: i64,
        sucker: i64,
        temptation: i64,
    },
    #[error("unknown choice label {0:?}")]
    UnknownChoice(String),
    #[error("{event} is not accepted during {stage:?}")]
    IllegalEvent { stage: Stage, event: &'static str },
    #[error("player {seat} already submitted during {stage:?}")]
    DuplicateSubmission { stage: Stage, seat: usize },
    #[error("submission at {at_ms} arrived after the {stage:?} deadline {deadline_ms}")]
    StageClosed {
        stage: Stage,
        at_ms: u64,
        deadline_ms: u64,
    },
    #[error("timer for {stage:?} fired at {at_ms}, before its deadline {deadline_ms}")]
    TimerNotElapsed {
        stage: Stage,
        at_ms: u64,
        deadline_ms: u64,
    },
    #[error("stage timers must be positive")]
    ZeroTimer,
    #[error("round index must be at least 1")]
    ZeroRound,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("round-robin pairing needs an even number of participants, got {0}")]
    OddParticipantCount(usize),
    #[error("{rounds} rounds requested but each participant has only {max} distinct partners")]
    TooManyRounds { rounds: u32, max: u32 },
    #[error("bipartite groups differ in size ({a} vs {b})")]
    SizeMismatch { a: usize, b: usize },
    #[error("participant ids must be distinct")]
    DuplicateParticipant,
}
