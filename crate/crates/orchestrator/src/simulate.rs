//! Scripted participants and a discrete-event driver on a mock clock, for
//! running whole sessions without a network or a real clock.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use dilemma_agents::Backend;
use dilemma_core::{Choice, Labeling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SessionConfig;
use crate::error::OrchestratorError;
use crate::event::EventRecord;
use crate::payout::NormBin;
use crate::protocol::{ClientMessage, ClientStage, ServerMessage, StagePayload};
use crate::questionnaire::{Demographics, QuestionnaireAnswers, SEVEN_C_ITEMS, TRAIT_ITEMS};
use crate::result::SessionResult;
use crate::session::{Input, Participant, Session};
use crate::mix;

/// Default mock epoch for simulated sessions.
pub const SIM_EPOCH_MS: u64 = 1_700_000_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct HumanPolicy {
    pub cooperate_prob: f64,
    /// Quiz attempts answered wrongly before answering correctly.
    pub failed_quiz_attempts: u32,
    /// Delay between a screen appearing and the reply.
    pub think_ms: u64,
    /// From this round on the participant neither types nor clicks.
    pub silent_from_round: Option<u32>,
    /// Drops the connection on going silent.
    pub disconnect_when_silent: bool,
}

impl Default for HumanPolicy {
    fn default() -> Self {
        HumanPolicy {
            cooperate_prob: 0.7,
            failed_quiz_attempts: 0,
            think_ms: 2_000,
            silent_from_round: None,
            disconnect_when_silent: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClientAction {
    Send { delay_ms: u64, message: ClientMessage },
    Disconnect,
}

const LINES: [&str; 4] = [
    "Let's both choose A this round.",
    "I will pick A if you do.",
    "A gives us both 70, deal?",
    "OK.",
];

/// A participant that answers each screen according to its policy.
pub struct ScriptedClient {
    token: String,
    policy: HumanPolicy,
    rng: ChaCha8Rng,
    quiz_key: Vec<String>,
    config: SessionConfig,
    gone: bool,
}

impl ScriptedClient {
    pub fn new(token: impl Into<String>, seed: u64, policy: HumanPolicy, config: &SessionConfig) -> Self {
        ScriptedClient {
            token: token.into(),
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            quiz_key: config.quiz_items().into_iter().map(|q| q.answer).collect(),
            config: config.clone(),
            gone: false,
        }
    }

    pub fn join(&self) -> ClientMessage {
        ClientMessage::Join {
            token: self.token.clone(),
        }
    }

    pub fn react(&mut self, message: &ServerMessage) -> Vec<ClientAction> {
        if self.gone {
            return Vec::new();
        }
        let ServerMessage::StageEnter {
            stage, round, payload, ..
        } = message
        else {
            return Vec::new();
        };
        if let (Some(from), Some(round)) = (self.policy.silent_from_round, round) {
            if *round >= from {
                self.gone = true;
                return if self.policy.disconnect_when_silent {
                    vec![ClientAction::Disconnect]
                } else {
                    Vec::new()
                };
            }
        }
        let message = match (stage, payload) {
            (ClientStage::Quiz, StagePayload::Quiz { attempts, .. }) => {
                let answers = if *attempts < self.policy.failed_quiz_attempts {
                    vec!["?".to_string(); self.quiz_key.len()]
                } else {
                    self.quiz_key.clone()
                };
                ClientMessage::QuizAnswers { answers }
            }
            (ClientStage::Msg1Compose | ClientStage::Msg2Compose, _) => ClientMessage::MessageText {
                text: LINES[self.rng.random_range(0..LINES.len())].to_string(),
            },
            (ClientStage::Decide, _) => ClientMessage::Choice {
                choice: if self.rng.random_bool(self.policy.cooperate_prob) { Choice::A } else { Choice::B },
            },
            (ClientStage::Questionnaire, _) => ClientMessage::QuestionnaireAnswers {
                answers: self.answers(),
            },
            _ => return Vec::new(),
        };
        vec![ClientAction::Send {
            delay_ms: self.policy.think_ms,
            message,
        }]
    }

    fn answers(&mut self) -> QuestionnaireAnswers {
        let c = &self.config;
        let rng = &mut self.rng;
        let mut likerts = |asked: bool, items: &[&str]| {
            if !asked {
                return Default::default();
            }
            items.iter().map(|k| (k.to_string(), rng.random_range(-3..=3i8))).collect()
        };
        let trait_likerts = likerts(c.asks("traits"), &TRAIT_ITEMS);
        let seven_c_likerts = likerts(c.asks("seven_c"), &SEVEN_C_ITEMS);
        let bins: Vec<NormBin> = c.norm_bins();
        QuestionnaireAnswers {
            norm_estimate: c.asks("norm_estimate").then(|| bins[self.rng.random_range(0..bins.len())]),
            trait_likerts,
            seven_c_likerts,
            humanness: (c.asks("humanness") && c.treatment.labeling == Labeling::Uninformed)
                .then(|| self.rng.random_range(-3..=3)),
            llm_familiarity: c.asks("llm_familiarity").then(|| self.rng.random_range(1..=7)),
            svo_items: if c.asks("svo") {
                (0..6).map(|_| self.rng.random_range(0..=100)).collect()
            } else {
                Vec::new()
            },
            demographics: if c.asks("demographics") {
                Demographics {
                    age: Some(self.rng.random_range(18..=40)),
                    gender: Some("unspecified".into()),
                    field: Some("economics".into()),
                }
            } else {
                Demographics::default()
            },
        }
    }
}

/// Everything a simulated session produced.
#[derive(Clone, Debug)]
pub struct SimulatedRun {
    pub result: SessionResult,
    pub events: Vec<EventRecord>,
    /// Messages each participant received, in order, keyed by id.
    pub transcripts: HashMap<String, Vec<ServerMessage>>,
    /// Inputs the session rejected, as (participant, error code).
    pub rejections: Vec<(String, String)>,
}

/// Runs a complete session with scripted participants. Client actions and
/// stage deadlines are processed in time order; an action due exactly at a
/// deadline is handled before the deadline fires.
pub fn run_simulated(
    session_id: &str,
    config: SessionConfig,
    roster: &[Participant],
    policies: &[HumanPolicy],
    backend: &dyn Backend,
    start_ms: u64,
) -> Result<SimulatedRun, OrchestratorError> {
    if policies.len() != roster.len() {
        return Err(OrchestratorError::ConfigInvalid("one policy per participant".into()));
    }
    let mut clients: Vec<ScriptedClient> = roster
        .iter()
        .zip(policies)
        .enumerate()
        .map(|(i, (p, policy))| {
            ScriptedClient::new(p.token.clone(), mix(&[config.seed, 0xc1_1e47, i as u64]), policy.clone(), &config)
        })
        .collect();
    let by_id: HashMap<String, usize> = roster.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
    let mut session = Session::new(session_id, config, roster.to_vec(), start_ms)?;
    let mut run = SimulatedRun {
        result: SessionResult {
            session_id: session_id.into(),
            treatment: session.config().treatment,
            participants: Vec::new(),
        },
        events: Vec::new(),
        transcripts: roster.iter().map(|p| (p.id.clone(), Vec::new())).collect(),
        rejections: Vec::new(),
    };

    // (time, sequence) orders the queue; the action itself lives in `pending`.
    let mut queue: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    let mut pending: HashMap<u64, (usize, ClientAction)> = HashMap::new();
    let mut seq = 0u64;
    let mut schedule = |queue: &mut BinaryHeap<_>, pending: &mut HashMap<_, _>, at: u64, who: usize, a: ClientAction| {
        queue.push(Reverse((at, seq)));
        pending.insert(seq, (who, a));
        seq += 1;
    };
    for (i, c) in clients.iter().enumerate() {
        let join = c.join();
        schedule(&mut queue, &mut pending, start_ms, i, ClientAction::Send { delay_ms: 0, message: join });
    }

    let mut started = false;
    let mut now = start_ms;
    for _ in 0..1_000_000 {
        if session.is_finished() {
            run.events = session.drain_events();
            run.result = session.result().cloned().expect("finished sessions have a result");
            return Ok(run);
        }
        let next_action = queue.peek().map(|Reverse((t, _))| *t);
        let deadline = session.next_deadline();
        let action_first = match (next_action, deadline) {
            (Some(t), Some(d)) => t <= d,
            (Some(_), None) => true,
            (None, _) => false,
        };
        let (input, who) = if action_first {
            let Reverse((t, s)) = queue.pop().expect("peeked");
            now = t;
            let (who, action) = pending.remove(&s).expect("scheduled");
            let id = roster[who].id.clone();
            let input = match action {
                ClientAction::Disconnect => Input::Disconnect { participant: id },
                ClientAction::Send { message, .. } => to_input(message, id),
            };
            (input, Some(who))
        } else if let Some(d) = deadline {
            now = d;
            (Input::Tick, None)
        } else if !started {
            started = true;
            (Input::Start, None)
        } else {
            return Err(OrchestratorError::SessionIncomplete(format!(
                "{session_id}: simulation stalled in {:?}",
                session.phase()
            )));
        };
        match session.handle(now, input, backend) {
            Ok(out) => {
                for o in out {
                    let i = by_id[&o.to];
                    run.transcripts.get_mut(&o.to).expect("known").push(o.message.clone());
                    for action in clients[i].react(&o.message) {
                        let at = match &action {
                            ClientAction::Send { delay_ms, .. } => now + delay_ms,
                            ClientAction::Disconnect => now,
                        };
                        schedule(&mut queue, &mut pending, at, i, action);
                    }
                }
            }
            Err(e) => {
                let who = who.map_or_else(|| "server".to_string(), |i| roster[i].id.clone());
                run.rejections.push((who, e.code().to_string()));
            }
        }
    }
    Err(OrchestratorError::SessionIncomplete(format!("{session_id}: step limit reached")))
}

/// Maps a client message to an engine input for `participant`.
pub fn to_input(message: ClientMessage, participant: String) -> Input {
    match message {
        ClientMessage::Join { token } => Input::Join { token },
        ClientMessage::QuizAnswers { answers } => Input::QuizAnswers { participant, answers },
        ClientMessage::MessageText { text } => Input::Message { participant, text },
        ClientMessage::Choice { choice } => Input::Choice { participant, choice },
        ClientMessage::QuestionnaireAnswers { answers } => Input::Questionnaire { participant, answers },
    }
}

/// Roster of `n` participants with ids `p01..` and deterministic tokens.
pub fn numbered_roster(n: usize) -> Vec<Participant> {
    (1..=n)
        .map(|i| Participant {
            id: format!("p{i:02}"),
            token: format!("token-{i:02}"),
        })
        .collect()
}
