//! Per-participant session results, and their reconstruction from the
//! event log alone.

use std::collections::{BTreeMap, HashMap, HashSet};

use dilemma_core::{score_round, Choice};
use serde::{Deserialize, Serialize};

use crate::config::{SessionConfig, Treatment};
use crate::error::OrchestratorError;
use crate::event::{Event, EventRecord, Fallback};
use crate::money::Money;
use crate::payout::{compute_payout, grade_norm_estimate};
use crate::questionnaire::QuestionnaireResponse;

/// One round as seen by one human participant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub round: u32,
    pub pair: usize,
    pub associate: String,
    pub associate_is_agent: bool,
    /// In slot order; a timed-out message is an empty string.
    pub own_messages: Vec<String>,
    pub associate_messages: Vec<String>,
    pub own_choice: Choice,
    pub own_choice_timed_out: bool,
    pub associate_choice: Choice,
    pub associate_choice_timed_out: bool,
    pub own_payoff: i64,
    pub associate_payoff: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub participant_id: String,
    pub interactions: Vec<InteractionRecord>,
    pub total_points: i64,
    pub questionnaire: Option<QuestionnaireResponse>,
    pub realized_norm_rate: Option<f64>,
    pub correct_norm_guesses: u32,
    pub payout: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_id: String,
    pub treatment: Treatment,
    /// In roster order.
    pub participants: Vec<ParticipantResult>,
}

#[derive(Default)]
struct PairLog {
    messages: BTreeMap<(String, u8), String>,
    choices: HashMap<String, (Choice, bool)>,
}

/// Rebuilds the session result from its event log, re-checking sequence
/// numbers, payoffs, point totals and payouts on the way. A log that does
/// not end the session yields `SessionIncomplete`.
pub fn replay(events: &[EventRecord]) -> Result<SessionResult, OrchestratorError> {
    let mismatch = |m: String| OrchestratorError::ReplayMismatch(m);
    let first = events
        .first()
        .ok_or_else(|| OrchestratorError::SessionIncomplete(String::new()))?;
    let session_id = first.session_id.clone();
    let (config, roster): (SessionConfig, Vec<String>) = match &first.event {
        Event::SessionCreated { config, participants, .. } => (config.clone(), participants.clone()),
        _ => return Err(mismatch("log does not start with session_created".into())),
    };
    let humans: HashSet<&str> = roster.iter().map(String::as_str).collect();
    let mut results: Vec<ParticipantResult> = roster
        .iter()
        .map(|id| ParticipantResult {
            participant_id: id.clone(),
            interactions: Vec::new(),
            total_points: 0,
            questionnaire: None,
            realized_norm_rate: None,
            correct_norm_guesses: 0,
            payout: Money::default(),
        })
        .collect();
    let index: HashMap<String, usize> = roster.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
    let mut pairs: HashMap<(u32, usize), PairLog> = HashMap::new();
    let mut paid: HashSet<String> = HashSet::new();
    let mut finished = false;

    for (k, record) in events.iter().enumerate() {
        if record.seq != k as u64 {
            return Err(mismatch(format!("event {k} has seq {}", record.seq)));
        }
        if record.session_id != session_id {
            return Err(mismatch(format!("event {k} belongs to session {:?}", record.session_id)));
        }
        if finished {
            return Err(mismatch(format!("event {k} follows session_finished")));
        }
        match &record.event {
            Event::SessionCreated { .. } if k > 0 => {
                return Err(mismatch(format!("second session_created at {k}")));
            }
            Event::MessageSent {
                round,
                pair,
                sender,
                slot,
                text,
                ..
            } => {
                let log = pairs.entry((*round, *pair)).or_default();
                if log.messages.insert((sender.clone(), *slot), text.clone()).is_some() {
                    return Err(mismatch(format!("duplicate message {sender} r{round} slot {slot}")));
                }
            }
            Event::ChoiceSubmitted {
                round,
                pair,
                party,
                choice,
            } => insert_choice(&mut pairs, *round, *pair, party, *choice, false)?,
            Event::TimeoutFallback {
                round,
                pair,
                party,
                fallback: Fallback::RandomChoice { choice },
                ..
            } => insert_choice(&mut pairs, *round, *pair, party, *choice, true)?,
            Event::RoundResult {
                round,
                pair,
                parties,
                choices,
                payoffs,
            } => {
                let log = pairs
                    .remove(&(*round, *pair))
                    .ok_or_else(|| mismatch(format!("round {round} pair {pair} has no submissions")))?;
                let mut logged = [(Choice::A, false); 2];
                for s in 0..2 {
                    logged[s] = *log
                        .choices
                        .get(&parties[s])
                        .ok_or_else(|| mismatch(format!("no choice from {} in round {round}", parties[s])))?;
                    if logged[s].0 != choices[s] {
                        return Err(mismatch(format!("round {round} choice of {} differs", parties[s])));
                    }
                }
                let expected = score_round(choices[0], choices[1], &config.payoff);
                if (expected.0, expected.1) != (payoffs[0], payoffs[1]) {
                    return Err(mismatch(format!("round {round} pair {pair} payoffs {payoffs:?}")));
                }
                let texts = |party: &str| -> Vec<String> {
                    log.messages
                        .iter()
                        .filter(|((sender, _), _)| sender == party)
                        .map(|(_, text)| text.clone())
                        .collect()
                };
                for s in 0..2 {
                    let o = 1 - s;
                    let Some(&h) = index.get(&parties[s]) else {
                        continue;
                    };
                    let r = &mut results[h];
                    r.total_points += payoffs[s];
                    r.interactions.push(InteractionRecord {
                        round: *round,
                        pair: *pair,
                        associate: parties[o].clone(),
                        associate_is_agent: !humans.contains(parties[o].as_str()),
                        own_messages: texts(&parties[s]),
                        associate_messages: texts(&parties[o]),
                        own_choice: choices[s],
                        own_choice_timed_out: logged[s].1,
                        associate_choice: choices[o],
                        associate_choice_timed_out: logged[o].1,
                        own_payoff: payoffs[s],
                        associate_payoff: payoffs[o],
                    });
                }
            }
            Event::QuestionnaireSubmitted { response } => {
                let h = *index
                    .get(&response.participant_id)
                    .ok_or_else(|| mismatch(format!("questionnaire from {:?}", response.participant_id)))?;
                results[h].questionnaire = Some(response.clone());
            }
            Event::PayoutComputed {
                participant,
                total_points,
                realized_norm_rate,
                correct_norm_guesses,
                payout,
            } => {
                let h = *index
                    .get(participant)
                    .ok_or_else(|| mismatch(format!("payout for {participant:?}")))?;
                let r = &mut results[h];
                if *total_points != r.total_points {
                    return Err(mismatch(format!(
                        "{participant} total {total_points} but rounds sum to {}",
                        r.total_points
                    )));
                }
                let graded = match (&r.questionnaire, realized_norm_rate) {
                    (Some(q), Some(rate)) => q
                        .answers
                        .norm_estimate
                        .map_or(0, |bin| u32::from(grade_norm_estimate(bin, *rate))),
                    _ => 0,
                };
                if graded != *correct_norm_guesses {
                    return Err(mismatch(format!("{participant} norm grade differs")));
                }
                if compute_payout(*total_points, *correct_norm_guesses, &config) != *payout {
                    return Err(mismatch(format!("{participant} payout {payout} differs")));
                }
                r.realized_norm_rate = *realized_norm_rate;
                r.correct_norm_guesses = *correct_norm_guesses;
                r.payout = *payout;
                paid.insert(participant.clone());
            }
            Event::SessionFinished => finished = true,
            _ => {}
        }
    }
    if !finished {
        return Err(OrchestratorError::SessionIncomplete(session_id));
    }
    if let Some(missing) = roster.iter().find(|id| !paid.contains(*id)) {
        return Err(mismatch(format!("no payout for {missing}")));
    }
    let coop: Vec<(u64, u64)> = results
        .iter()
        .map(|r| {
            let c = r.interactions.iter().filter(|i| i.own_choice.is_cooperation()).count();
            (c as u64, r.interactions.len() as u64)
        })
        .collect();
    for (h, r) in results.iter().enumerate() {
        if crate::session::realized_norm_rate(&coop, h) != r.realized_norm_rate {
            return Err(mismatch(format!("{} realized norm differs", r.participant_id)));
        }
    }
    Ok(SessionResult {
        session_id,
        treatment: config.treatment,
        participants: results,
    })
}

fn insert_choice(
    pairs: &mut HashMap<(u32, usize), PairLog>,
    round: u32,
    pair: usize,
    party: &str,
    choice: Choice,
    timed_out: bool,
) -> Result<(), OrchestratorError> {
    let log = pairs.entry((round, pair)).or_default();
    if log.choices.insert(party.to_string(), (choice, timed_out)).is_some() {
        return Err(OrchestratorError::ReplayMismatch(format!(
            "duplicate choice from {party} in round {round}"
        )));
    }
    Ok(())
}
