//! Per-round stage machine.
//!
//! A round with communication runs `Msg1Compose -> Msg1Read -> Msg2Compose ->
//! Msg2Read -> Decide -> Results -> Done`; without communication it starts at
//! `Decide`. Both players compose message k at the same time and only then read
//! each other's message k. Wall-clock time and randomness are supplied by the
//! caller, so [`RoundState::advance`] is a pure function of its inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GameError;
use crate::payoff::{score_round, Choice, PayoffMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Msg1Compose,
    Msg1Read,
    Msg2Compose,
    Msg2Read,
    Decide,
    Results,
    Done,
}

impl Stage {
    pub fn is_compose(self) -> bool {
        matches!(self, Stage::Msg1Compose | Stage::Msg2Compose)
    }

    /// Message slot (1 or 2) composed during this stage.
    pub fn message_slot(self) -> Option<u8> {
        match self {
            Stage::Msg1Compose => Some(1),
            Stage::Msg2Compose => Some(2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Msg1Compose => "msg1_compose",
            Stage::Msg1Read => "msg1_read",
            Stage::Msg2Compose => "msg2_compose",
            Stage::Msg2Read => "msg2_read",
            Stage::Decide => "decide",
            Stage::Results => "results",
            Stage::Done => "done",
        }
    }
}

/// Which side of the pair a player sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seat {
    First,
    Second,
}

impl Seat {
    pub const BOTH: [Seat; 2] = [Seat::First, Seat::Second];

    pub fn index(self) -> usize {
        match self {
            Seat::First => 0,
            Seat::Second => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::First => Seat::Second,
            Seat::Second => Seat::First,
        }
    }
}

/// Stage durations in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimers {
    pub compose_ms: u64,
    pub read_ms: u64,
    pub decide_ms: u64,
    pub results_ms: u64,
}

impl Default for StageTimers {
    fn default() -> Self {
        StageTimers {
            compose_ms: 60_000,
            read_ms: 30_000,
            decide_ms: 40_000,
            results_ms: 30_000,
        }
    }
}

impl StageTimers {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.compose_ms == 0 || self.read_ms == 0 || self.decide_ms == 0 || self.results_ms == 0
        {
            return Err(GameError::ZeroTimer);
        }
        Ok(())
    }

    pub fn duration_of(&self, stage: Stage) -> Option<u64> {
        match stage {
            Stage::Msg1Compose | Stage::Msg2Compose => Some(self.compose_ms),
            Stage::Msg1Read | Stage::Msg2Read => Some(self.read_ms),
            Stage::Decide => Some(self.decide_ms),
            Stage::Results => Some(self.results_ms),
            Stage::Done => None,
        }
    }
}

/// Everything about a round that does not change while it runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRules {
    pub payoff: PayoffMatrix,
    pub timers: StageTimers,
    pub communication: bool,
}

impl Default for RoundRules {
    fn default() -> Self {
        RoundRules {
            payoff: PayoffMatrix::default(),
            timers: StageTimers::default(),
            communication: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: Seat,
    pub slot: u8,
    pub text: String,
    pub at_ms: u64,
    /// Set when the compose stage ran out and the empty message was recorded.
    pub timed_out: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceSource {
    Submitted,
    TimeoutRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedChoice {
    pub choice: Choice,
    pub source: ChoiceSource,
    pub at_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageEvent {
    Message { seat: Seat, text: String, at_ms: u64 },
    Choice { seat: Seat, choice: Choice, at_ms: u64 },
    TimerExpired { at_ms: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundState {
    round_index: u32,
    stage: Stage,
    rules: RoundRules,
    messages: Vec<Message>,
    choices: [Option<RecordedChoice>; 2],
    payoffs: Option<(i64, i64)>,
    deadline_ms: u64,
}

impl RoundState {
    /// Opens round `round_index` (1-based) at `now_ms`.
    pub fn new(round_index: u32, rules: RoundRules, now_ms: u64) -> Result<Self, GameError> {
        if round_index == 0 {
            return Err(GameError::ZeroRound);
        }
        rules.timers.validate()?;
        let stage = if rules.communication {
            Stage::Msg1Compose
        } else {
            Stage::Decide
        };
        let deadline_ms = now_ms + rules.timers.duration_of(stage).unwrap_or(0);
        Ok(RoundState {
            round_index,
            stage,
            rules,
            messages: Vec::with_capacity(4),
            choices: [None, None],
            payoffs: None,
            deadline_ms,
        })
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn rules(&self) -> &RoundRules {
        &self.rules
    }

    pub fn deadline_ms(&self) -> u64 {
        self.deadline_ms
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message(&self, seat: Seat, slot: u8) -> Option<&Message> {
        self.messages
            .iter()
            .find(|m| m.sender == seat && m.slot == slot)
    }

    pub fn choice(&self, seat: Seat) -> Option<&RecordedChoice> {
        self.choices[seat.index()].as_ref()
    }

    pub fn payoffs(&self) -> Option<(i64, i64)> {
        self.payoffs
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    /// Returns the successor state. `rng` is consulted only when a decision
    /// deadline passes with a choice missing.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        event: StageEvent,
        rng: &mut R,
    ) -> Result<RoundState, GameError> {
        let mut next = self.clone();
        let stage = self.stage;
        match event {
            StageEvent::Message { seat, text, at_ms } => {
                let slot = match stage.message_slot() {
                    Some(slot) => slot,
                    None => return Err(self.illegal("message submission")),
                };
                self.check_open(at_ms)?;
                if self.message(seat, slot).is_some() {
                    return Err(GameError::DuplicateSubmission {
                        stage,
                        seat: seat.index(),
                    });
                }
                next.messages.push(Message {
                    sender: seat,
                    slot,
                    text,
                    at_ms,
                    timed_out: false,
                });
                if next.message(seat.other(), slot).is_some() {
                    next.enter(next_stage(stage), at_ms);
                }
            }
            StageEvent::Choice { seat, choice, at_ms } => {
                if stage != Stage::Decide {
                    return Err(self.illegal("choice submission"));
                }
                self.check_open(at_ms)?;
                if self.choices[seat.index()].is_some() {
                    return Err(GameError::DuplicateSubmission {
                        stage,
                        seat: seat.index(),
                    });
                }
                next.choices[seat.index()] = Some(RecordedChoice {
                    choice,
                    source: ChoiceSource::Submitted,
                    at_ms,
                });
                if next.choices.iter().all(Option::is_some) {
                    next.settle();
                    next.enter(Stage::Results, at_ms);
                }
            }
            StageEvent::TimerExpired { at_ms } => {
                if stage == Stage::Done {
                    return Err(self.illegal("timer expiry"));
                }
                if at_ms < self.deadline_ms {
                    return Err(GameError::TimerNotElapsed {
                        stage,
                        at_ms,
                        deadline_ms: self.deadline_ms,
                    });
                }
                if let Some(slot) = stage.message_slot() {
                    for seat in Seat::BOTH {
                        if next.message(seat, slot).is_none() {
                            next.messages.push(Message {
                                sender: seat,
                                slot,
                                text: String::new(),
                                at_ms,
                                timed_out: true,
                            });
                        }
                    }
                } else if stage == Stage::Decide {
                    for seat in Seat::BOTH {
                        if next.choices[seat.index()].is_none() {
                            next.choices[seat.index()] = Some(RecordedChoice {
                                choice: Choice::random(rng),
                                source: ChoiceSource::TimeoutRandom,
                                at_ms,
                            });
                        }
                    }
                    next.settle();
                }
                next.enter(next_stage(stage), at_ms);
            }
        }
        debug_assert!(next.check_invariants());
        Ok(next)
    }

    fn illegal(&self, event: &'static str) -> GameError {
        GameError::IllegalEvent {
            stage: self.stage,
            event,
        }
    }

    fn check_open(&self, at_ms: u64) -> Result<(), GameError> {
        if at_ms > self.deadline_ms {
            return Err(GameError::StageClosed {
                stage: self.stage,
                at_ms,
                deadline_ms: self.deadline_ms,
            });
        }
        Ok(())
    }

    fn settle(&mut self) {
        if let [Some(a), Some(b)] = self.choices {
            self.payoffs = Some(score_round(a.choice, b.choice, &self.rules.payoff));
        }
    }

    fn enter(&mut self, stage: Stage, now_ms: u64) {
        self.stage = stage;
        self.deadline_ms = now_ms + self.rules.timers.duration_of(stage).unwrap_or(0);
    }

    /// Structural invariants; exposed for property tests.
    pub fn check_invariants(&self) -> bool {
        let per_seat_ok = Seat::BOTH.iter().all(|&seat| {
            self.messages.iter().filter(|m| m.sender == seat).count() <= 2
        });
        let slots_ok = self.messages.iter().all(|m| match m.slot {
            1 => self.stage > Stage::Msg1Compose || self.message(m.sender.other(), 1).is_none(),
            2 => self.stage > Stage::Msg2Compose || self.message(m.sender.other(), 2).is_none(),
            _ => false,
        });
        let both_chosen = self.choices.iter().all(Option::is_some);
        per_seat_ok && slots_ok && (self.payoffs.is_some() == both_chosen)
    }
}

fn next_stage(stage: Stage) -> Stage {
    match stage {
        Stage::Msg1Compose => Stage::Msg1Read,
        Stage::Msg1Read => Stage::Msg2Compose,
        Stage::Msg2Compose => Stage::Msg2Read,
        Stage::Msg2Read => Stage::Decide,
        Stage::Decide => Stage::Results,
        Stage::Results | Stage::Done => Stage::Done,
    }
}
