use std::collections::{HashMap, HashSet};

use dilemma_agents::{MockBackend, MockConfig};
use dilemma_core::{score_round, ExecMode, Labeling, Pairing, Stage};
use dilemma_orchestrator::event::events_to_jsonl;
use dilemma_orchestrator::{
    compute_payout, export_results, numbered_roster, replay, run_simulated, Event, Fallback, HumanPolicy,
    Money, OrchestratorError, Participant, SessionConfig, SimulatedRun, Treatment, SIM_EPOCH_MS,
};

fn config(pairing: Pairing, labeling: Labeling, rounds: u32, seed: u64) -> SessionConfig {
    let mut c = SessionConfig::new(Treatment {
        pairing,
        labeling,
        communication: true,
    });
    c.rounds = rounds;
    c.seed = seed;
    c
}

fn mock(seed: u64) -> MockBackend {
    MockBackend::new(MockConfig {
        seed,
        ..MockConfig::default()
    })
}

fn run(config: SessionConfig, roster: &[Participant], policies: &[HumanPolicy]) -> SimulatedRun {
    let backend = mock(config.seed);
    run_simulated("s1", config, roster, policies, &backend, SIM_EPOCH_MS).unwrap()
}

fn hf_run(seed: u64) -> SimulatedRun {
    let roster = numbered_roster(2);
    run(
        config(Pairing::HF, Labeling::Informed, 10, seed),
        &roster,
        &[HumanPolicy::default(), HumanPolicy::default()],
    )
}

#[test]
fn hf_session_is_byte_reproducible_and_replays() {
    let a = hf_run(7);
    let b = hf_run(7);
    assert_eq!(events_to_jsonl(&a.events), events_to_jsonl(&b.events));
    assert_eq!(a.result, b.result);
    assert_eq!(replay(&a.events).unwrap(), a.result);

    let c = hf_run(8);
    assert_ne!(events_to_jsonl(&a.events), events_to_jsonl(&c.events));
}

#[test]
fn hf_agents_are_persistent_and_complete_three_calls_per_round() {
    let run = hf_run(3);
    let created = match &run.events[0].event {
        Event::SessionCreated { agents, .. } => agents.clone(),
        other => panic!("{other:?}"),
    };
    assert_eq!(created.len(), 2);
    let mut requests: HashMap<&str, usize> = HashMap::new();
    for e in &run.events {
        if let Event::LlmRequest { agent, .. } = &e.event {
            *requests.entry(agent.as_str()).or_default() += 1;
        }
    }
    for a in &created {
        assert_eq!(requests[a.id.as_str()], 30, "{}", a.id);
    }
    for p in &run.result.participants {
        assert_eq!(p.interactions.len(), 10);
        let partner: HashSet<&str> = p.interactions.iter().map(|r| r.associate.as_str()).collect();
        assert_eq!(partner.len(), 1, "one agent per human for the whole session");
        assert!(p.interactions.iter().all(|r| r.associate_is_agent));
        assert!(p.interactions.iter().all(|r| r.associate_messages.len() == 2 && r.own_messages.len() == 2));
    }
}

#[test]
fn hh_four_by_three_has_six_pairings_without_repeats() {
    let roster = numbered_roster(4);
    let run = run(
        config(Pairing::HH, Labeling::Informed, 3, 11),
        &roster,
        &vec![HumanPolicy::default(); 4],
    );
    let mut seen = HashSet::new();
    let mut results = 0;
    for e in &run.events {
        if let Event::RoundResult { parties, .. } = &e.event {
            results += 1;
            let mut key = parties.clone();
            key.sort();
            assert!(seen.insert(key), "repeated pair {parties:?}");
        }
    }
    assert_eq!(results, 6);
    let choices: usize = run.result.participants.iter().map(|p| p.interactions.len()).sum();
    assert_eq!(choices, 12);
    let tables = export_results(&[run.result]).unwrap();
    assert_eq!(tables.interactions.lines().count(), 1 + 12);
}

#[test]
fn odd_human_roster_is_rejected() {
    let roster = numbered_roster(3);
    let err = run_simulated(
        "odd",
        config(Pairing::HH, Labeling::Informed, 2, 0),
        &roster,
        &vec![HumanPolicy::default(); 3],
        &mock(0),
        SIM_EPOCH_MS,
    )
    .unwrap_err();
    assert!(matches!(err, OrchestratorError::ConfigInvalid(_)), "{err}");
}

#[test]
fn quiz_retake_is_logged_per_attempt() {
    let roster = numbered_roster(2);
    let policies = [
        HumanPolicy {
            failed_quiz_attempts: 1,
            ..HumanPolicy::default()
        },
        HumanPolicy::default(),
    ];
    let run = run(config(Pairing::HC, Labeling::Informed, 2, 5), &roster, &policies);
    let attempts: Vec<(String, u32, bool)> = run
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::QuizAttempt {
                participant,
                attempt,
                passed,
            } => Some((participant.clone(), *attempt, *passed)),
            _ => None,
        })
        .collect();
    assert_eq!(
        attempts,
        vec![
            ("p01".to_string(), 1, false),
            ("p02".to_string(), 1, true),
            ("p01".to_string(), 2, true),
        ]
    );
}

#[test]
fn silent_and_disconnected_participants_time_out() {
    let roster = numbered_roster(2);
    let policies = [
        HumanPolicy {
            silent_from_round: Some(2),
            disconnect_when_silent: true,
            ..HumanPolicy::default()
        },
        HumanPolicy::default(),
    ];
    let cfg = config(Pairing::HS, Labeling::Uninformed, 3, 2);
    let timers = cfg.timers;
    let run = run(cfg, &roster, &policies);
    assert!(run.events.iter().any(|e| matches!(&e.event,
        Event::ParticipantDisconnected { participant } if participant == "p01")));

    // Exactly one fallback per timed-out slot: 2 messages + 1 choice per silent round.
    let fallbacks: Vec<_> = run
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::TimeoutFallback {
                round,
                party,
                stage,
                fallback,
                ..
            } => Some((*round, party.clone(), *stage, fallback.clone())),
            _ => None,
        })
        .collect();
    assert_eq!(fallbacks.len(), 6, "{fallbacks:?}");
    assert!(fallbacks.iter().all(|f| f.1 == "p01" && f.0 >= 2));
    assert_eq!(fallbacks.iter().filter(|f| f.3 == Fallback::EmptyMessage).count(), 4);
    assert!(fallbacks
        .iter()
        .filter(|f| matches!(f.3, Fallback::RandomChoice { .. }))
        .all(|f| f.2 == Stage::Decide));

    let p01 = &run.result.participants[0];
    assert!(!p01.interactions[0].own_choice_timed_out);
    assert!(p01.interactions[1..].iter().all(|r| r.own_choice_timed_out));
    assert!(p01.interactions[1..].iter().all(|r| r.own_messages == ["", ""]));
    // No questionnaire from the silent participant: graded as zero correct.
    assert!(p01.questionnaire.is_none());
    assert_eq!(p01.correct_norm_guesses, 0);

    // No stage outlives its timer: every stage entry is at or before the
    // previous stage's deadline.
    let mut last_deadline: HashMap<(u32, usize), u64> = HashMap::new();
    for e in &run.events {
        if let Event::StageEnter {
            round: Some(r),
            pair: Some(p),
            deadline_ms: Some(d),
            ..
        } = &e.event
        {
            if let Some(prev) = last_deadline.insert((*r, *p), *d) {
                assert!(e.at_ms <= prev);
            }
            assert!(*d - e.at_ms <= timers.compose_ms.max(timers.decide_ms));
        }
    }
    assert_eq!(replay(&run.events).unwrap(), run.result);
}

#[test]
fn late_submissions_are_rejected_and_filled_in() {
    let roster = numbered_roster(2);
    let cfg = config(Pairing::HH, Labeling::Informed, 1, 4);
    let slow = HumanPolicy {
        think_ms: cfg.timers.compose_ms + 1,
        ..HumanPolicy::default()
    };
    let run = run(cfg, &roster, &[slow, HumanPolicy::default()]);
    // By the time a late input arrives the pair has moved to the next stage.
    assert!(run.rejections.iter().any(|(p, code)| p == "p01" && code == "illegal"));
    assert!(run.rejections.iter().all(|(p, _)| p == "p01"));
    assert!(run.result.participants[0].interactions[0].own_choice_timed_out);
}

#[test]
fn conservation_of_points_and_payouts() {
    let run = hf_run(21);
    let cfg = config(Pairing::HF, Labeling::Informed, 10, 21);
    for e in &run.events {
        if let Event::RoundResult { choices, payoffs, .. } = &e.event {
            let (a, b) = score_round(choices[0], choices[1], &cfg.payoff);
            assert_eq!([a, b], *payoffs);
        }
    }
    for p in &run.result.participants {
        let sum: i64 = p.interactions.iter().map(|r| r.own_payoff).sum();
        assert_eq!(p.total_points, sum);
        assert_eq!(p.payout, compute_payout(sum, p.correct_norm_guesses, &cfg));
        assert!(p.payout >= Money::from_cents(1500));
    }
}

#[test]
fn sequential_and_parallel_sessions_log_the_same_events() {
    let roster = numbered_roster(4);
    let mut seq = config(Pairing::HF, Labeling::Uninformed, 4, 9);
    seq.exec = ExecMode::Sequential;
    let mut par = seq.clone();
    par.exec = ExecMode::Parallel;
    let a = run(seq, &roster, &vec![HumanPolicy::default(); 4]);
    let b = run(par, &roster, &vec![HumanPolicy::default(); 4]);
    // The configs differ in `exec`, which the first event records.
    assert_eq!(events_to_jsonl(&a.events[1..]), events_to_jsonl(&b.events[1..]));
}

#[test]
fn tampered_or_truncated_logs_do_not_replay() {
    let run = hf_run(1);
    let mut tampered = run.events.clone();
    let k = tampered
        .iter()
        .position(|e| matches!(e.event, Event::RoundResult { .. }))
        .unwrap();
    if let Event::RoundResult { payoffs, .. } = &mut tampered[k].event {
        payoffs[0] += 1;
    }
    assert!(matches!(replay(&tampered), Err(OrchestratorError::ReplayMismatch(_))));

    let truncated = &run.events[..run.events.len() - 1];
    assert!(matches!(replay(truncated), Err(OrchestratorError::SessionIncomplete(_))));

    let mut gap = run.events.clone();
    gap.remove(5);
    assert!(matches!(replay(&gap), Err(OrchestratorError::ReplayMismatch(_))));
}

#[test]
fn participants_never_see_other_identifiers() {
    let roster: Vec<Participant> = ["ident-kestrel", "ident-marmot", "ident-osprey", "ident-walrus"]
        .iter()
        .enumerate()
        .map(|(i, id)| Participant {
            id: id.to_string(),
            token: format!("tok-{i}"),
        })
        .collect();
    let run = run(
        config(Pairing::HH, Labeling::Informed, 3, 13),
        &roster,
        &vec![HumanPolicy::default(); 4],
    );
    let hf = hf_run(13);
    for (transcripts, ids) in [
        (&run.transcripts, vec!["ident-", "tok-"]),
        (&hf.transcripts, vec!["p01", "p02", "agent-"]),
    ] {
        for (who, messages) in transcripts {
            assert!(!messages.is_empty());
            for m in messages {
                let line = m.encode();
                for id in &ids {
                    assert!(!line.contains(id), "{who} received {line}");
                }
            }
        }
    }
}
