//! One persona-vs-persona matchup: two groups of agents, a fresh bipartite
//! schedule per repeat, and the full message + decision pipeline per pair.

use std::sync::Arc;

use dilemma_agents::{Agent, AgentLogRecord, Backend, FallbackReason, Persona, PersonaPromptSet, RequestSettings};
use dilemma_core::{build_bipartite_schedule, score_round, Choice, ExecMode, ParticipantId, PayoffMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agreement::detect_agreement;
use crate::error::SimError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matchup {
    pub persona_a: Persona,
    pub persona_b: Persona,
    pub group_size: usize,
    pub repeats: u32,
    pub rounds: u32,
    pub backend_id: String,
    pub seed: u64,
}

impl Matchup {
    pub fn new(persona_a: Persona, persona_b: Persona, backend_id: impl Into<String>) -> Matchup {
        Matchup {
            persona_a,
            persona_b,
            group_size: 10,
            repeats: 5,
            rounds: 10,
            backend_id: backend_id.into(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Matchup {
        self.seed = seed;
        self
    }

    pub fn with_shape(mut self, group_size: usize, repeats: u32, rounds: u32) -> Matchup {
        self.group_size = group_size;
        self.repeats = repeats;
        self.rounds = rounds;
        self
    }

    pub fn id(&self) -> String {
        format!("{}-vs-{}", self.persona_a.key(), self.persona_b.key())
    }

    pub fn is_self_play(&self) -> bool {
        self.persona_a == self.persona_b
    }

    /// Records in which each group appears: one per agent per round per
    /// repeat.
    pub fn samples_per_group(&self) -> usize {
        self.repeats as usize * self.rounds as usize * self.group_size
    }
}

/// One pair's round. Index 0 is the group-A agent, index 1 its group-B
/// associate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRecord {
    pub matchup_id: String,
    pub backend: String,
    pub repeat: u32,
    pub round: u32,
    pub pair: [String; 2],
    pub personas: [Persona; 2],
    /// First and second message of each agent.
    pub messages: [[String; 2]; 2],
    pub choices: [Choice; 2],
    pub payoffs: [i64; 2],
    /// Whether the decision came from the timeout rule.
    pub decision_fallback: [bool; 2],
    pub agreement: Option<bool>,
    pub breach: Option<[bool; 2]>,
}

/// Where an interrupted matchup picks up: `round` (1-based) of `repeat`
/// (0-based) is the first one not yet completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeCursor {
    pub repeat: u32,
    pub round: u32,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub exec: ExecMode,
    pub payoff: PayoffMatrix,
    pub prompts: Arc<PersonaPromptSet>,
    pub example_dialogues: String,
    pub settings: RequestSettings,
    /// Fill `agreement`/`breach` with the rule-based detector.
    pub detect_agreement: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            exec: ExecMode::default(),
            payoff: PayoffMatrix::default(),
            prompts: Arc::new(PersonaPromptSet::builtin()),
            example_dialogues: String::new(),
            settings: RequestSettings::default(),
            detect_agreement: true,
        }
    }
}

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

fn map_pairs<T: Send, R: Send>(items: Vec<T>, exec: ExecMode, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    if exec == ExecMode::Parallel {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

struct PairResult {
    messages: [[String; 2]; 2],
    choices: [Choice; 2],
    payoffs: [i64; 2],
    fallback: [bool; 2],
    log: Vec<AgentLogRecord>,
}

fn play_pair(
    a: &mut Agent,
    b: &mut Agent,
    backend: &dyn Backend,
    round: u32,
    payoff: &PayoffMatrix,
    seed: u64,
) -> PairResult {
    let mut log = Vec::new();
    let a1 = a.first_message(backend, round, &mut log).text;
    let b1 = b.first_message(backend, round, &mut log).text;
    a.receive(1, b1.clone());
    b.receive(1, a1.clone());
    let a2 = a.second_message(backend, &mut log).text;
    let b2 = b.second_message(backend, &mut log).text;
    a.receive(2, b2.clone());
    b.receive(2, a2.clone());
    let da = a.decide(backend, &mut log).choice;
    let db = b.decide(backend, &mut log).choice;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ca = da.unwrap_or_else(|| Choice::random(&mut rng));
    let cb = db.unwrap_or_else(|| Choice::random(&mut rng));
    let (pa, pb) = score_round(ca, cb, payoff);
    a.record_outcome(ca, cb, pa, pb).expect("rounds run in order");
    b.record_outcome(cb, ca, pb, pa).expect("rounds run in order");
    PairResult {
        messages: [[a1, a2], [b1, b2]],
        choices: [ca, cb],
        payoffs: [pa, pb],
        fallback: [da.is_none(), db.is_none()],
        log,
    }
}

fn backend_failed(log: &[AgentLogRecord]) -> bool {
    log.iter().any(|r| {
        matches!(
            r,
            AgentLogRecord::Fallback { reason: FallbackReason::BackendUnavailable, .. }
        )
    })
}

/// Receives every completed round; used for checkpointing.
pub trait RoundSink {
    fn round_completed(&mut self, records: &[SimRecord], log: &[AgentLogRecord]) -> Result<(), SimError>;
}

impl RoundSink for () {
    fn round_completed(&mut self, _: &[SimRecord], _: &[AgentLogRecord]) -> Result<(), SimError> {
        Ok(())
    }
}

/// Collects records and agent logs in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub log: Vec<AgentLogRecord>,
}

impl RoundSink for MemorySink {
    fn round_completed(&mut self, _: &[SimRecord], log: &[AgentLogRecord]) -> Result<(), SimError> {
        self.log.extend_from_slice(log);
        Ok(())
    }
}

/// Runs the whole matchup from scratch.
pub fn run_matchup(m: &Matchup, backend: &dyn Backend, opts: &RunOptions) -> Result<Vec<SimRecord>, SimError> {
    resume_matchup(m, backend, opts, Vec::new(), &mut ())
}

/// First round not covered by `completed`, which must be a prefix of the
/// matchup's records in (repeat, round) order. Trailing partial rounds are
/// ignored.
pub fn resume_cursor(m: &Matchup, completed: &[SimRecord]) -> Result<(ResumeCursor, usize), SimError> {
    let g = m.group_size;
    let id = m.id();
    let mismatch = |problem: String| SimError::CheckpointMismatch { expected: id.clone(), problem };
    let full_rounds = completed.len() / g.max(1);
    for (i, r) in completed.iter().enumerate() {
        if r.matchup_id != id || r.backend != m.backend_id {
            return Err(mismatch(format!("record {i} is from {}/{}", r.matchup_id, r.backend)));
        }
        let k = i / g;
        let (repeat, round) = ((k / m.rounds as usize) as u32, (k % m.rounds as usize) as u32 + 1);
        if (r.repeat, r.round) != (repeat, round) {
            return Err(mismatch(format!(
                "record {i} is repeat {} round {}, expected repeat {repeat} round {round}",
                r.repeat, r.round
            )));
        }
    }
    let cursor = ResumeCursor {
        repeat: (full_rounds / m.rounds as usize) as u32,
        round: (full_rounds % m.rounds as usize) as u32 + 1,
    };
    Ok((cursor, full_rounds * g))
}

/// Continues a matchup after the records in `completed`, reporting each
/// finished round to `sink`. Agents of an interrupted repeat get their
/// history back from the completed records.
pub fn resume_matchup(
    m: &Matchup,
    backend: &dyn Backend,
    opts: &RunOptions,
    mut completed: Vec<SimRecord>,
    sink: &mut dyn RoundSink,
) -> Result<Vec<SimRecord>, SimError> {
    let g = m.group_size;
    if g == 0 {
        return Err(SimError::EmptyGroup);
    }
    let (cursor, keep) = resume_cursor(m, &completed)?;
    completed.truncate(keep);
    let group_a: Vec<ParticipantId> = (0..g as u32).collect();
    let group_b: Vec<ParticipantId> = (g as u32..2 * g as u32).collect();
    let id = m.id();

    for repeat in cursor.repeat..m.repeats {
        let schedule = build_bipartite_schedule(&group_a, &group_b, m.rounds, mix(&[m.seed, u64::from(repeat)]))?;
        let make = |prefix: char, i: usize, persona: Persona| {
            Agent::new(
                format!("r{repeat}-{prefix}{i}"),
                persona,
                Arc::clone(&opts.prompts),
                &opts.example_dialogues,
                &opts.payoff,
            )
            .with_settings(opts.settings.clone())
        };
        let mut agents: Vec<Option<Agent>> = (0..g)
            .map(|i| make('a', i, m.persona_a))
            .chain((0..g).map(|i| make('b', i, m.persona_b)))
            .map(Some)
            .collect();
        let index = |agent_id: &str| -> usize {
            let (side, n) = agent_id.rsplit_once('-').expect("agent id").1.split_at(1);
            n.parse::<usize>().expect("agent index") + if side == "b" { g } else { 0 }
        };
        for r in completed.iter().filter(|r| r.repeat == repeat) {
            for (k, other) in [(0usize, 1usize), (1, 0)] {
                let agent = agents[index(&r.pair[k])].as_mut().expect("agent present");
                agent.begin_silent_round(r.round);
                agent
                    .record_outcome(r.choices[k], r.choices[other], r.payoffs[k], r.payoffs[other])
                    .expect("checkpoint rounds are ordered");
            }
        }

        let first_round = if repeat == cursor.repeat { cursor.round } else { 1 };
        for round in first_round..=m.rounds {
            let pairs = &schedule.pairings[round as usize - 1];
            let jobs: Vec<(usize, Agent, Agent)> = pairs
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| {
                    let a = agents[a as usize].take().expect("agent used once per round");
                    let b = agents[b as usize].take().expect("agent used once per round");
                    (k, a, b)
                })
                .collect();
            let results = map_pairs(jobs, opts.exec, |(k, mut a, mut b)| {
                let seed = mix(&[m.seed, u64::from(repeat), u64::from(round), k as u64]);
                let result = play_pair(&mut a, &mut b, backend, round, &opts.payoff, seed);
                (a, b, result)
            });

            let mut round_records = Vec::with_capacity(g);
            let mut round_log = Vec::new();
            let mut failed = false;
            for (a, b, res) in results {
                failed |= backend_failed(&res.log);
                let agreement = opts
                    .detect_agreement
                    .then(|| detect_agreement(&res.messages[0], &res.messages[1]));
                round_records.push(SimRecord {
                    matchup_id: id.clone(),
                    backend: m.backend_id.clone(),
                    repeat,
                    round,
                    pair: [a.id().to_string(), b.id().to_string()],
                    personas: [m.persona_a, m.persona_b],
                    messages: res.messages,
                    choices: res.choices,
                    payoffs: res.payoffs,
                    decision_fallback: res.fallback,
                    agreement,
                    breach: agreement.map(|ag| res.choices.map(|c| ag && c == Choice::B)),
                });
                round_log.extend(res.log);
                let (ia, ib) = (index(a.id()), index(b.id()));
                agents[ia] = Some(a);
                agents[ib] = Some(b);
            }
            if failed {
                return Err(SimError::BackendUnavailable {
                    backend: backend.id().to_string(),
                    cursor: ResumeCursor { repeat, round },
                    completed: completed.len(),
                });
            }
            sink.round_completed(&round_records, &round_log)?;
            completed.extend(round_records);
        }
    }
    Ok(completed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dilemma_agents::{MockBackend, MockConfig};

    #[test]
    fn mix_is_order_sensitive() {
        assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
        assert_eq!(mix(&[7, 8, 9]), mix(&[7, 8, 9]));
    }

    #[test]
    fn fair_self_play_covers_all_cross_pairs() {
        let m = Matchup::new(Persona::Fair, Persona::Fair, "mock").with_shape(2, 1, 2);
        let backend = MockBackend::new(MockConfig::default());
        let records = run_matchup(&m, &backend, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 4);
        let mut pairs: Vec<_> = records.iter().map(|r| r.pair.clone()).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 4);
    }

    #[test]
    fn too_many_rounds() {
        let m = Matchup::new(Persona::Fair, Persona::Selfish, "mock").with_shape(10, 1, 11);
        let backend = MockBackend::new(MockConfig::default());
        assert!(matches!(
            run_matchup(&m, &backend, &RunOptions::default()),
            Err(SimError::Schedule(dilemma_core::ScheduleError::TooManyRounds { .. }))
        ));
    }
}
