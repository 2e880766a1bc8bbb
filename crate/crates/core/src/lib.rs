//! Rules of a one-shot, anonymous prisoner's dilemma played over several
//! rounds with pre-play messaging: payoffs, the per-round stage machine and
//! repeat-free pairing schedules.
//!
//! Everything here is pure. Clocks and random number generators are passed in
//! by the caller.

pub mod error;
pub mod exec;
pub mod payoff;
pub mod round;
pub mod schedule;
pub mod treatment;

pub use error::{GameError, ScheduleError};
pub use exec::ExecMode;
pub use payoff::{score_round, Choice, PayoffMatrix};
pub use round::{
    ChoiceSource, Message, RecordedChoice, RoundRules, RoundState, Seat, Stage, StageEvent,
    StageTimers,
};
pub use schedule::{
    build_bipartite_schedule, build_schedule, PairSchedule, ParticipantId, ScheduleViolation,
};
pub use treatment::{Labeling, Pairing};
