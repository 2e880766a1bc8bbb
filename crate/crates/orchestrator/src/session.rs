//! The session engine. It performs no IO and reads no clock: the caller
//! passes the current time with every input and delivers the returned
//! messages. Agent turns are computed when their stage opens; all agents of
//! a stage are queried together (on the rayon pool in parallel mode) and
//! their submissions are applied in pair order.

use std::sync::Arc;

use dilemma_agents::{Agent, AgentLogRecord, Backend, PersonaPromptSet};
use dilemma_core::{
    build_schedule, Choice, ChoiceSource, PairSchedule, RoundState, Seat, Stage, StageEvent,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SessionConfig;
use crate::error::OrchestratorError;
use crate::event::{AgentInfo, Event, EventRecord, Fallback};
use crate::payout::{compute_payout, grade_norm_estimate};
use crate::protocol::{ClientStage, QuestionItem, QuizQuestion, ServerMessage, StagePayload};
use crate::questionnaire::{QuestionnaireAnswers, QuestionnaireResponse, SEVEN_C_ITEMS, TRAIT_ITEMS};
use crate::result::{InteractionRecord, ParticipantResult, SessionResult};
use crate::mix;

/// A human on the roster, identified to the server by an opaque join token.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Participant {
    pub id: String,
    pub token: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Join { token: String },
    /// Opens the instructions and quiz.
    Start,
    QuizAnswers { participant: String, answers: Vec<String> },
    Message { participant: String, text: String },
    Choice { participant: String, choice: Choice },
    Questionnaire { participant: String, answers: QuestionnaireAnswers },
    Disconnect { participant: String },
    /// Fires every stage deadline that has passed.
    Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outbound {
    pub to: String,
    pub message: ServerMessage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionPhase {
    Lobby,
    Quiz,
    Rounds { round: u32 },
    Questionnaire { deadline_ms: u64 },
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Party {
    Human(usize),
    Agent(usize),
}

struct Human {
    id: String,
    token: String,
    joined: bool,
    connected: bool,
    quiz_attempts: u32,
    quiz_passed: bool,
    response: Option<QuestionnaireResponse>,
    interactions: Vec<InteractionRecord>,
    total_points: i64,
}

struct PairRun {
    parties: [Party; 2],
    state: RoundState,
    rng: ChaCha8Rng,
    agent_acted: Option<Stage>,
}

enum AgentAction {
    Message(String),
    Choice(Option<Choice>),
}

pub struct Session {
    id: String,
    config: SessionConfig,
    humans: Vec<Human>,
    agents: Vec<Option<Agent>>,
    agent_ids: Vec<String>,
    schedule: Option<PairSchedule>,
    phase: SessionPhase,
    pairs: Vec<PairRun>,
    events: Vec<EventRecord>,
    next_seq: u64,
    now_ms: u64,
    result: Option<SessionResult>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        config: SessionConfig,
        roster: Vec<Participant>,
        now_ms: u64,
    ) -> Result<Session, OrchestratorError> {
        let id = id.into();
        config.validate()?;
        let invalid = |m: String| Err(OrchestratorError::ConfigInvalid(m));
        if roster.is_empty() {
            return invalid("roster is empty".into());
        }
        for (i, p) in roster.iter().enumerate() {
            if p.id.is_empty() || p.token.is_empty() {
                return invalid("participant ids and tokens must be non-empty".into());
            }
            if roster[..i].iter().any(|q| q.id == p.id || q.token == p.token) {
                return invalid(format!("participant {:?} or its token is duplicated", p.id));
            }
        }
        let n = roster.len();
        let schedule = match config.treatment.agent_persona() {
            None => {
                if n % 2 == 1 {
                    return invalid(format!("human-human sessions need an even roster, got {n}"));
                }
                let schedule = build_schedule(n, config.rounds, mix(&[config.seed, 0x5c4e_d01e]))
                    .map_err(|e| OrchestratorError::ConfigInvalid(e.to_string()))?;
                Some(schedule)
            }
            Some(_) => None,
        };

        let mut agents = Vec::new();
        let mut agent_ids = Vec::new();
        let mut agent_info = Vec::new();
        if let Some(persona) = config.treatment.agent_persona() {
            let prompts = Arc::new(PersonaPromptSet::builtin());
            for (i, p) in roster.iter().enumerate() {
                let agent_id = format!("agent-{}", i + 1);
                let agent = Agent::new(
                    agent_id.clone(),
                    persona,
                    Arc::clone(&prompts),
                    &config.example_dialogues,
                    &config.payoff,
                );
                agent_info.push(AgentInfo {
                    id: agent_id.clone(),
                    persona,
                    partner: p.id.clone(),
                    system_prompt: agent.system_prompt().to_string(),
                });
                agents.push(Some(agent));
                agent_ids.push(agent_id);
            }
        }

        let mut session = Session {
            id,
            humans: roster
                .into_iter()
                .map(|p| Human {
                    id: p.id,
                    token: p.token,
                    joined: false,
                    connected: false,
                    quiz_attempts: 0,
                    quiz_passed: false,
                    response: None,
                    interactions: Vec::new(),
                    total_points: 0,
                })
                .collect(),
            config,
            agents,
            agent_ids,
            schedule,
            phase: SessionPhase::Lobby,
            pairs: Vec::new(),
            events: Vec::new(),
            next_seq: 0,
            now_ms,
            result: None,
        };
        let participants = session.humans.iter().map(|h| h.id.clone()).collect();
        session.log(Event::SessionCreated {
            config: session.config.clone(),
            participants,
            agents: agent_info,
        });
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        self.phase == SessionPhase::Finished
    }

    pub fn schedule(&self) -> Option<&PairSchedule> {
        self.schedule.as_ref()
    }

    /// The participant a join token belongs to.
    pub fn participant_for_token(&self, token: &str) -> Option<&str> {
        self.humans.iter().find(|h| h.token == token).map(|h| h.id.as_str())
    }

    pub fn all_joined(&self) -> bool {
        self.humans.iter().all(|h| h.joined)
    }

    pub fn is_connected(&self, participant: &str) -> bool {
        self.humans.iter().any(|h| h.id == participant && h.connected)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Removes and returns the events logged since the last call.
    pub fn drain_events(&mut self) -> Vec<EventRecord> {
        std::mem::take(&mut self.events)
    }

    pub fn result(&self) -> Option<&SessionResult> {
        self.result.as_ref()
    }

    /// Earliest pending deadline, if any stage is waiting on a clock.
    pub fn next_deadline(&self) -> Option<u64> {
        match self.phase {
            SessionPhase::Rounds { .. } => self
                .pairs
                .iter()
                .filter(|p| !p.state.is_done())
                .map(|p| p.state.deadline_ms())
                .min(),
            SessionPhase::Questionnaire { deadline_ms } => Some(deadline_ms),
            _ => None,
        }
    }

    /// Applies one input at `now_ms` (never earlier than a previous call's
    /// time; earlier values are clamped). Rejected inputs leave the session
    /// unchanged.
    pub fn handle(
        &mut self,
        now_ms: u64,
        input: Input,
        backend: &dyn Backend,
    ) -> Result<Vec<Outbound>, OrchestratorError> {
        let now = now_ms.max(self.now_ms);
        self.now_ms = now;
        let mut out = Vec::new();
        match input {
            Input::Join { token } => {
                let h = self
                    .humans
                    .iter()
                    .position(|h| h.token == token)
                    .ok_or(OrchestratorError::UnknownToken)?;
                self.humans[h].joined = true;
                self.humans[h].connected = true;
                self.log(Event::ParticipantJoined {
                    participant: self.humans[h].id.clone(),
                });
                self.resync(h, &mut out);
            }
            Input::Start => {
                if self.phase != SessionPhase::Lobby {
                    return Err(OrchestratorError::NotAccepted { what: "start" });
                }
                self.phase = SessionPhase::Quiz;
                self.log(Event::StageEnter {
                    stage: ClientStage::Quiz,
                    round: None,
                    pair: None,
                    parties: self.humans.iter().map(|h| h.id.clone()).collect(),
                    deadline_ms: None,
                });
                for h in 0..self.humans.len() {
                    if self.humans[h].joined {
                        self.send_quiz(h, &mut out);
                    }
                }
            }
            Input::QuizAnswers { participant, answers } => {
                let h = self.human(&participant)?;
                if self.phase != SessionPhase::Quiz || self.humans[h].quiz_passed {
                    return Err(OrchestratorError::NotAccepted { what: "quiz answers" });
                }
                let passed = crate::quiz::quiz_gate(&answers, &self.config.quiz_items())
                    == crate::quiz::QuizOutcome::Pass;
                self.humans[h].quiz_attempts += 1;
                self.humans[h].quiz_passed = passed;
                self.log(Event::QuizAttempt {
                    participant,
                    attempt: self.humans[h].quiz_attempts,
                    passed,
                });
                if passed {
                    self.send_waiting(h, &mut out);
                } else {
                    self.send_quiz(h, &mut out);
                }
                if self.humans.iter().all(|h| h.quiz_passed) {
                    self.start_round(1, now, &mut out)?;
                }
            }
            Input::Message { participant, text } => {
                let (i, seat) = self.seat_of(&participant)?;
                let event = StageEvent::Message { seat, text, at_ms: now };
                self.advance_pair(i, event, now, &mut out)?;
            }
            Input::Choice { participant, choice } => {
                let (i, seat) = self.seat_of(&participant)?;
                let event = StageEvent::Choice { seat, choice, at_ms: now };
                self.advance_pair(i, event, now, &mut out)?;
            }
            Input::Questionnaire { participant, answers } => {
                let h = self.human(&participant)?;
                if !matches!(self.phase, SessionPhase::Questionnaire { .. }) || self.humans[h].response.is_some() {
                    return Err(OrchestratorError::NotAccepted { what: "questionnaire answers" });
                }
                answers.validate(&self.config)?;
                let response = QuestionnaireResponse {
                    participant_id: participant,
                    answers,
                };
                self.log(Event::QuestionnaireSubmitted {
                    response: response.clone(),
                });
                self.humans[h].response = Some(response);
                self.send_waiting(h, &mut out);
                if self.humans.iter().all(|h| h.response.is_some()) {
                    self.finish(now, &mut out);
                }
            }
            Input::Disconnect { participant } => {
                let h = self.human(&participant)?;
                if self.humans[h].connected {
                    self.humans[h].connected = false;
                    self.log(Event::ParticipantDisconnected { participant });
                }
            }
            Input::Tick => match self.phase {
                SessionPhase::Rounds { .. } => {
                    for i in 0..self.pairs.len() {
                        let state = &self.pairs[i].state;
                        if !state.is_done() && now >= state.deadline_ms() {
                            self.advance_pair(i, StageEvent::TimerExpired { at_ms: now }, now, &mut out)?;
                        }
                    }
                }
                SessionPhase::Questionnaire { deadline_ms } if now >= deadline_ms => {
                    self.finish(now, &mut out);
                }
                _ => {}
            },
        }
        self.progress(now, backend, &mut out)?;
        Ok(out)
    }

    fn log(&mut self, event: Event) {
        self.events.push(EventRecord {
            seq: self.next_seq,
            at_ms: self.now_ms,
            session_id: self.id.clone(),
            event,
        });
        self.next_seq += 1;
    }

    fn human(&self, participant: &str) -> Result<usize, OrchestratorError> {
        self.humans
            .iter()
            .position(|h| h.id == participant)
            .ok_or_else(|| OrchestratorError::UnknownParticipant(participant.to_string()))
    }

    fn seat_of(&self, participant: &str) -> Result<(usize, Seat), OrchestratorError> {
        let h = self.human(participant)?;
        if !matches!(self.phase, SessionPhase::Rounds { .. }) {
            return Err(OrchestratorError::NotAccepted { what: "round submissions" });
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            for seat in Seat::BOTH {
                if pair.parties[seat.index()] == Party::Human(h) {
                    return Ok((i, seat));
                }
            }
        }
        Err(OrchestratorError::NotAccepted { what: "round submissions" })
    }

    fn party_id(&self, party: Party) -> String {
        match party {
            Party::Human(h) => self.humans[h].id.clone(),
            Party::Agent(a) => self.agent_ids[a].clone(),
        }
    }

    fn send(&self, h: usize, message: ServerMessage, out: &mut Vec<Outbound>) {
        out.push(Outbound {
            to: self.humans[h].id.clone(),
            message,
        });
    }

    fn send_waiting(&self, h: usize, out: &mut Vec<Outbound>) {
        self.send(
            h,
            ServerMessage::StageEnter {
                stage: ClientStage::Waiting,
                round: None,
                deadline_epoch_ms: None,
                payload: StagePayload::None,
            },
            out,
        );
    }

    fn send_quiz(&self, h: usize, out: &mut Vec<Outbound>) {
        let items = self
            .config
            .quiz_items()
            .into_iter()
            .map(|q| QuizQuestion {
                question: q.question,
                options: q.options,
            })
            .collect();
        self.send(
            h,
            ServerMessage::StageEnter {
                stage: ClientStage::Quiz,
                round: None,
                deadline_epoch_ms: None,
                payload: StagePayload::Quiz {
                    instructions: self.config.instruction_text(),
                    items,
                    attempts: self.humans[h].quiz_attempts,
                },
            },
            out,
        );
    }

    fn stage_message(&self, pair: &PairRun) -> ServerMessage {
        let stage = pair.state.stage();
        let payload = match stage {
            Stage::Msg1Compose | Stage::Msg2Compose => StagePayload::Compose {
                slot: stage.message_slot().expect("compose stage"),
                associate_label: self.config.treatment.associate_label().to_string(),
            },
            Stage::Decide => StagePayload::Decide {
                options: [Choice::A, Choice::B],
            },
            _ => StagePayload::None,
        };
        ServerMessage::StageEnter {
            stage: stage.into(),
            round: Some(pair.state.round_index()),
            deadline_epoch_ms: (!pair.state.is_done()).then(|| pair.state.deadline_ms()),
            payload,
        }
    }

    fn questionnaire_pages(&self) -> Vec<ServerMessage> {
        let likert = |id: String, text: String| QuestionItem {
            id,
            text,
            scale: "likert".into(),
            options: Vec::new(),
        };
        let mut sections: Vec<(String, Vec<QuestionItem>)> = Vec::new();
        for section in &self.config.questionnaire_battery {
            let items = match section.as_str() {
                "norm_estimate" => vec![QuestionItem {
                    id: "norm_estimate".into(),
                    text: "What share of the other participants in this session do you think chose A?".into(),
                    scale: "bin".into(),
                    options: self
                        .config
                        .norm_bins()
                        .iter()
                        .map(|b| format!("{}-{}", b.lo, b.hi))
                        .collect(),
                }],
                "seven_c" => SEVEN_C_ITEMS
                    .iter()
                    .map(|i| likert(i.to_string(), format!("Your associates' messages showed {i}.")))
                    .collect(),
                "traits" => TRAIT_ITEMS
                    .iter()
                    .map(|i| likert(i.to_string(), format!("Your associates showed {i}.")))
                    .collect(),
                "humanness" if self.config.treatment.labeling == dilemma_core::Labeling::Uninformed => {
                    vec![likert("humanness".into(), "Your associates were humans.".into())]
                }
                "humanness" => continue,
                "llm_familiarity" => vec![QuestionItem {
                    id: "llm_familiarity".into(),
                    text: "How familiar are you with large language models?".into(),
                    scale: "integer".into(),
                    options: Vec::new(),
                }],
                "svo" => (1..=6)
                    .map(|k| QuestionItem {
                        id: format!("svo_{k}"),
                        text: format!("Allocation item {k}"),
                        scale: "slider".into(),
                        options: Vec::new(),
                    })
                    .collect(),
                _ => ["age", "gender", "field"]
                    .iter()
                    .map(|&id| QuestionItem {
                        id: id.into(),
                        text: id.into(),
                        scale: if id == "age" { "integer" } else { "text" }.into(),
                        options: Vec::new(),
                    })
                    .collect(),
            };
            sections.push((section.clone(), items));
        }
        let pages = sections.len() as u32;
        sections
            .into_iter()
            .enumerate()
            .map(|(k, (section, items))| ServerMessage::QuestionnairePage {
                page: k as u32 + 1,
                pages,
                section,
                items,
            })
            .collect()
    }

    fn send_questionnaire(&self, h: usize, out: &mut Vec<Outbound>) {
        let pages = self.questionnaire_pages();
        let deadline = match self.phase {
            SessionPhase::Questionnaire { deadline_ms } => Some(deadline_ms),
            _ => None,
        };
        self.send(
            h,
            ServerMessage::StageEnter {
                stage: ClientStage::Questionnaire,
                round: None,
                deadline_epoch_ms: deadline,
                payload: StagePayload::Questionnaire {
                    pages: pages.len() as u32,
                },
            },
            out,
        );
        for page in pages {
            self.send(h, page, out);
        }
    }

    fn send_finished(&self, h: usize, out: &mut Vec<Outbound>) {
        let payout = self
            .result
            .as_ref()
            .map(|r| r.participants[h].payout)
            .unwrap_or_default();
        self.send(
            h,
            ServerMessage::StageEnter {
                stage: ClientStage::Finished,
                round: None,
                deadline_epoch_ms: None,
                payload: StagePayload::Finished {
                    total_points: self.humans[h].total_points,
                    payout,
                },
            },
            out,
        );
    }

    /// Brings a (re)joining participant's screen up to date.
    fn resync(&self, h: usize, out: &mut Vec<Outbound>) {
        match self.phase {
            SessionPhase::Lobby => self.send_waiting(h, out),
            SessionPhase::Quiz if self.humans[h].quiz_passed => self.send_waiting(h, out),
            SessionPhase::Quiz => self.send_quiz(h, out),
            SessionPhase::Rounds { round } => {
                let Some(pair) = self
                    .pairs
                    .iter()
                    .find(|p| p.parties.contains(&Party::Human(h)))
                else {
                    return self.send_waiting(h, out);
                };
                let seat = if pair.parties[0] == Party::Human(h) { Seat::First } else { Seat::Second };
                self.send(h, self.stage_message(pair), out);
                let stage = pair.state.stage();
                for (slot, read_from) in [(1u8, Stage::Msg1Read), (2, Stage::Msg2Read)] {
                    if stage >= read_from {
                        if let Some(m) = pair.state.message(seat.other(), slot) {
                            self.send(
                                h,
                                ServerMessage::MessageDelivered {
                                    round,
                                    slot,
                                    text: m.text.clone(),
                                },
                                out,
                            );
                        }
                    }
                }
                if stage >= Stage::Results {
                    if let Some(last) = self.humans[h].interactions.last().filter(|r| r.round == round) {
                        self.send(h, round_result(last, self.humans[h].total_points), out);
                    }
                }
            }
            SessionPhase::Questionnaire { .. } if self.humans[h].response.is_some() => self.send_waiting(h, out),
            SessionPhase::Questionnaire { .. } => self.send_questionnaire(h, out),
            SessionPhase::Finished => self.send_finished(h, out),
        }
    }

    fn start_round(&mut self, round: u32, now: u64, out: &mut Vec<Outbound>) -> Result<(), OrchestratorError> {
        self.phase = SessionPhase::Rounds { round };
        let parties: Vec<[Party; 2]> = match &self.schedule {
            Some(schedule) => schedule.pairings[round as usize - 1]
                .iter()
                .map(|&(a, b)| [Party::Human(a as usize), Party::Human(b as usize)])
                .collect(),
            None => (0..self.humans.len()).map(|h| [Party::Human(h), Party::Agent(h)]).collect(),
        };
        let rules = self.config.round_rules();
        self.pairs = Vec::with_capacity(parties.len());
        for (i, parties) in parties.into_iter().enumerate() {
            self.pairs.push(PairRun {
                parties,
                state: RoundState::new(round, rules, now)?,
                rng: ChaCha8Rng::seed_from_u64(mix(&[self.config.seed, u64::from(round), i as u64])),
                agent_acted: None,
            });
        }
        for i in 0..self.pairs.len() {
            self.enter_stage(i, now, out);
        }
        Ok(())
    }

    fn advance_pair(
        &mut self,
        i: usize,
        event: StageEvent,
        now: u64,
        out: &mut Vec<Outbound>,
    ) -> Result<(), OrchestratorError> {
        let pair = &mut self.pairs[i];
        let next = pair.state.advance(event, &mut pair.rng)?;
        let prev = std::mem::replace(&mut pair.state, next);
        let round = prev.round_index();
        let parties = pair.parties;

        let new_messages: Vec<_> = self.pairs[i]
            .state
            .messages()
            .iter()
            .filter(|m| prev.message(m.sender, m.slot).is_none())
            .cloned()
            .collect();
        for m in new_messages {
            let sender = self.party_id(parties[m.sender.index()]);
            self.log(Event::MessageSent {
                round,
                pair: i,
                sender: sender.clone(),
                slot: m.slot,
                text: m.text.clone(),
                timed_out: m.timed_out,
            });
            if m.timed_out {
                self.log(Event::TimeoutFallback {
                    round,
                    pair: i,
                    party: sender,
                    stage: prev.stage(),
                    fallback: Fallback::EmptyMessage,
                });
            }
        }
        for seat in Seat::BOTH {
            if prev.choice(seat).is_some() {
                continue;
            }
            let Some(c) = self.pairs[i].state.choice(seat).copied() else {
                continue;
            };
            let party = self.party_id(parties[seat.index()]);
            self.log(match c.source {
                ChoiceSource::Submitted => Event::ChoiceSubmitted {
                    round,
                    pair: i,
                    party,
                    choice: c.choice,
                },
                ChoiceSource::TimeoutRandom => Event::TimeoutFallback {
                    round,
                    pair: i,
                    party,
                    stage: Stage::Decide,
                    fallback: Fallback::RandomChoice { choice: c.choice },
                },
            });
        }
        if prev.stage() != self.pairs[i].state.stage() {
            self.enter_stage(i, now, out);
        }
        Ok(())
    }

    /// Side effects of pair `i` arriving in its current stage.
    fn enter_stage(&mut self, i: usize, _now: u64, out: &mut Vec<Outbound>) {
        let stage = self.pairs[i].state.stage();
        if stage == Stage::Done {
            return;
        }
        let round = self.pairs[i].state.round_index();
        let parties = self.pairs[i].parties;
        self.log(Event::StageEnter {
            stage: stage.into(),
            round: Some(round),
            pair: Some(i),
            parties: parties.iter().map(|&p| self.party_id(p)).collect(),
            deadline_ms: Some(self.pairs[i].state.deadline_ms()),
        });
        let view = self.stage_message(&self.pairs[i]);
        for party in parties {
            if let Party::Human(h) = party {
                self.send(h, view.clone(), out);
            }
        }

        match stage {
            Stage::Msg1Read | Stage::Msg2Read => {
                let slot = if stage == Stage::Msg1Read { 1 } else { 2 };
                for seat in Seat::BOTH {
                    let text = self.pairs[i]
                        .state
                        .message(seat.other(), slot)
                        .map(|m| m.text.clone())
                        .unwrap_or_default();
                    let recipient = parties[seat.index()];
                    self.log(Event::MessageDelivered {
                        round,
                        pair: i,
                        recipient: self.party_id(recipient),
                        slot,
                    });
                    match recipient {
                        Party::Human(h) => self.send(h, ServerMessage::MessageDelivered { round, slot, text }, out),
                        Party::Agent(a) => self.agents[a].as_mut().expect("agent present").receive(slot, text),
                    }
                }
            }
            Stage::Results => {
                let state = &self.pairs[i].state;
                let (p0, p1) = state.payoffs().expect("results have payoffs");
                let choices = Seat::BOTH.map(|s| *state.choice(s).expect("results have choices"));
                let payoffs = [p0, p1];
                let messages = Seat::BOTH.map(|s| {
                    let mut ms: Vec<_> = state.messages().iter().filter(|m| m.sender == s).collect();
                    ms.sort_by_key(|m| m.slot);
                    ms.into_iter().map(|m| m.text.clone()).collect::<Vec<_>>()
                });
                let ids = parties.map(|p| self.party_id(p));
                self.log(Event::RoundResult {
                    round,
                    pair: i,
                    parties: ids.clone(),
                    choices: choices.map(|c| c.choice),
                    payoffs,
                });
                for seat in Seat::BOTH {
                    let (k, o) = (seat.index(), seat.other().index());
                    match parties[k] {
                        Party::Human(h) => {
                            let record = InteractionRecord {
                                round,
                                pair: i,
                                associate: ids[o].clone(),
                                associate_is_agent: matches!(parties[o], Party::Agent(_)),
                                own_messages: messages[k].clone(),
                                associate_messages: messages[o].clone(),
                                own_choice: choices[k].choice,
                                own_choice_timed_out: choices[k].source == ChoiceSource::TimeoutRandom,
                                associate_choice: choices[o].choice,
                                associate_choice_timed_out: choices[o].source == ChoiceSource::TimeoutRandom,
                                own_payoff: payoffs[k],
                                associate_payoff: payoffs[o],
                            };
                            let human = &mut self.humans[h];
                            human.total_points += payoffs[k];
                            human.interactions.push(record);
                            let msg = round_result(human.interactions.last().expect("just pushed"), human.total_points);
                            self.send(h, msg, out);
                        }
                        Party::Agent(a) => {
                            self.agents[a]
                                .as_mut()
                                .expect("agent present")
                                .record_outcome(choices[k].choice, choices[o].choice, payoffs[k], payoffs[o])
                                .expect("agent rounds are recorded in order");
                        }
                    }
                }
            }
            _ => {}
        }
    }

    /// Runs pending agent turns and moves between rounds and phases until
    /// the session waits on a participant or a clock.
    fn progress(&mut self, now: u64, backend: &dyn Backend, out: &mut Vec<Outbound>) -> Result<(), OrchestratorError> {
        loop {
            let SessionPhase::Rounds { round } = self.phase else {
                return Ok(());
            };
            let jobs: Vec<(usize, Stage, usize, Agent)> = (0..self.pairs.len())
                .filter_map(|i| {
                    let pair = &self.pairs[i];
                    let stage = pair.state.stage();
                    let needs_turn = stage.is_compose() || stage == Stage::Decide;
                    let Party::Agent(a) = pair.parties[1] else {
                        return None;
                    };
                    (needs_turn && pair.agent_acted != Some(stage)).then_some((i, stage, a))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .map(|(i, stage, a)| (i, stage, a, self.agents[a].take().expect("agent present")))
                .collect();
            if !jobs.is_empty() {
                self.run_agent_turns(round, jobs, now, backend, out)?;
                continue;
            }
            if self.pairs.iter().all(|p| p.state.is_done()) {
                if round < self.config.rounds {
                    self.start_round(round + 1, now, out)?;
                } else {
                    self.enter_questionnaire(now, out);
                }
                continue;
            }
            return Ok(());
        }
    }

    fn run_agent_turns(
        &mut self,
        round: u32,
        jobs: Vec<(usize, Stage, usize, Agent)>,
        now: u64,
        backend: &dyn Backend,
        out: &mut Vec<Outbound>,
    ) -> Result<(), OrchestratorError> {
        let communication = self.config.treatment.communication;
        let turn = |(i, stage, a, mut agent): (usize, Stage, usize, Agent)| {
            let mut log = Vec::new();
            let action = match stage {
                Stage::Msg1Compose => AgentAction::Message(agent.first_message(backend, round, &mut log).text),
                Stage::Msg2Compose => AgentAction::Message(agent.second_message(backend, &mut log).text),
                _ => {
                    if !communication {
                        agent.begin_silent_round(round);
                    }
                    AgentAction::Choice(agent.decide(backend, &mut log).choice)
                }
            };
            (i, stage, a, agent, action, log)
        };
        let results: Vec<_> = match self.config.exec {
            #[cfg(feature = "parallel")]
            dilemma_core::ExecMode::Parallel => {
                use rayon::prelude::*;
                jobs.into_par_iter().map(turn).collect()
            }
            _ => jobs.into_iter().map(turn).collect(),
        };
        for (i, stage, a, agent, action, log) in results {
            self.agents[a] = Some(agent);
            self.pairs[i].agent_acted = Some(stage);
            for record in log {
                self.log_agent_record(record);
            }
            let event = match action {
                AgentAction::Message(text) => StageEvent::Message {
                    seat: Seat::Second,
                    text,
                    at_ms: now,
                },
                AgentAction::Choice(Some(choice)) => StageEvent::Choice {
                    seat: Seat::Second,
                    choice,
                    at_ms: now,
                },
                // No usable decision: the stage deadline draws one.
                AgentAction::Choice(None) => continue,
            };
            self.advance_pair(i, event, now, out)?;
        }
        Ok(())
    }

    fn log_agent_record(&mut self, record: AgentLogRecord) {
        match record {
            AgentLogRecord::Completion {
                agent_id,
                round_index,
                phase,
                entry,
            } => {
                self.log(Event::LlmRequest {
                    agent: agent_id.clone(),
                    round: round_index,
                    phase,
                    attempt: entry.attempt,
                    prompt: entry.prompt,
                });
                self.log(Event::LlmResponse {
                    agent: agent_id,
                    round: round_index,
                    phase,
                    attempt: entry.attempt,
                    response: entry.response,
                    error: entry.error,
                });
            }
            AgentLogRecord::Fallback {
                agent_id,
                round_index,
                phase,
                reason,
                ..
            } => self.log(Event::AgentFallback {
                agent: agent_id,
                round: round_index,
                phase,
                reason,
            }),
        }
    }

    fn enter_questionnaire(&mut self, now: u64, out: &mut Vec<Outbound>) {
        self.pairs.clear();
        let deadline_ms = now + self.config.questionnaire_ms;
        self.phase = SessionPhase::Questionnaire { deadline_ms };
        self.log(Event::StageEnter {
            stage: ClientStage::Questionnaire,
            round: None,
            pair: None,
            parties: self.humans.iter().map(|h| h.id.clone()).collect(),
            deadline_ms: Some(deadline_ms),
        });
        if self.config.questionnaire_battery.is_empty() {
            return self.finish(now, out);
        }
        for h in 0..self.humans.len() {
            self.send_questionnaire(h, out);
        }
    }

    /// Grades norm estimates, computes payouts and closes the session.
    fn finish(&mut self, _now: u64, out: &mut Vec<Outbound>) {
        let coop: Vec<(u64, u64)> = self
            .humans
            .iter()
            .map(|h| {
                let c = h.interactions.iter().filter(|r| r.own_choice.is_cooperation()).count();
                (c as u64, h.interactions.len() as u64)
            })
            .collect();
        let mut participants = Vec::with_capacity(self.humans.len());
        for h in 0..self.humans.len() {
            let realized = realized_norm_rate(&coop, h);
            let correct = match (&self.humans[h].response, realized) {
                (Some(r), Some(rate)) => r
                    .answers
                    .norm_estimate
                    .map_or(0, |bin| u32::from(grade_norm_estimate(bin, rate))),
                _ => 0,
            };
            let total = self.humans[h].total_points;
            let payout = compute_payout(total, correct, &self.config);
            self.log(Event::PayoutComputed {
                participant: self.humans[h].id.clone(),
                total_points: total,
                realized_norm_rate: realized,
                correct_norm_guesses: correct,
                payout,
            });
            participants.push(ParticipantResult {
                participant_id: self.humans[h].id.clone(),
                interactions: self.humans[h].interactions.clone(),
                total_points: total,
                questionnaire: self.humans[h].response.clone(),
                realized_norm_rate: realized,
                correct_norm_guesses: correct,
                payout,
            });
        }
        self.log(Event::StageEnter {
            stage: ClientStage::Finished,
            round: None,
            pair: None,
            parties: self.humans.iter().map(|h| h.id.clone()).collect(),
            deadline_ms: None,
        });
        self.log(Event::SessionFinished);
        self.result = Some(SessionResult {
            session_id: self.id.clone(),
            treatment: self.config.treatment,
            participants,
        });
        self.phase = SessionPhase::Finished;
        for h in 0..self.humans.len() {
            self.send_finished(h, out);
        }
    }
}

/// Cooperation rate of the other humans in the session, or the
/// participant's own rate when there is no other human.
pub(crate) fn realized_norm_rate(coop: &[(u64, u64)], h: usize) -> Option<f64> {
    let others = coop
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != h)
        .fold((0, 0), |acc, (_, &(c, n))| (acc.0 + c, acc.1 + n));
    let (c, n) = if others.1 > 0 { others } else { coop[h] };
    (n > 0).then(|| c as f64 / n as f64)
}

fn round_result(r: &InteractionRecord, total_points: i64) -> ServerMessage {
    ServerMessage::RoundResult {
        round: r.round,
        own_choice: r.own_choice,
        own_payoff: r.own_payoff,
        associate_choice: r.associate_choice,
        associate_payoff: r.associate_payoff,
        total_points,
    }
}
