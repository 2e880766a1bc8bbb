use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use dilemma_agents::{MockBackend, MockConfig};
use dilemma_analysis::report::{load_surveys, Dataset};
use dilemma_core::{Labeling, Pairing, StageTimers};
use dilemma_orchestrator::event::{read_events, write_events};
use dilemma_orchestrator::export::INTERACTION_COLUMNS;
use dilemma_orchestrator::server::{serve, ServeOptions};
use dilemma_orchestrator::{
    export_dataset, numbered_roster, replay, run_simulated, ClientMessage, ClientStage, HumanPolicy,
    OrchestratorError, ScriptedClient, ServerMessage, Session, SessionConfig, SessionStore, Treatment, SIM_EPOCH_MS,
};

fn config(pairing: Pairing, rounds: u32, seed: u64) -> SessionConfig {
    let mut c = SessionConfig::new(Treatment {
        pairing,
        labeling: Labeling::Uninformed,
        communication: true,
    });
    c.rounds = rounds;
    c.seed = seed;
    c
}

/// Registers and simulates a session in the store.
fn simulate_into(store: &SessionStore, id: &str, pairing: Pairing, n: usize, rounds: u32) {
    let cfg = config(pairing, rounds, id.len() as u64);
    let roster = numbered_roster(n);
    store.create(id, &cfg, &roster).unwrap();
    let backend = MockBackend::new(MockConfig::default());
    let run = run_simulated(id, cfg, &roster, &vec![HumanPolicy::default(); n], &backend, SIM_EPOCH_MS).unwrap();
    write_events(&store.events_path(id), &run.events).unwrap();
}

#[test]
fn export_tables_load_in_the_analysis_tools() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path().join("sessions"));
    simulate_into(&store, "hh-1", Pairing::HH, 4, 3);
    simulate_into(&store, "hf-1", Pairing::HF, 2, 10);
    let ids = store.list().unwrap();
    assert_eq!(ids, ["hf-1", "hh-1"]);

    let tables = export_dataset(&store, &ids).unwrap();
    assert_eq!(tables, export_dataset(&store, &ids).unwrap(), "re-export is identical");
    let out = dir.path().join("dataset");
    tables.write_to(&out).unwrap();

    let data = Dataset::load_dir(&out).unwrap();
    assert_eq!(data.interactions.len(), 20 + 12);
    assert_eq!(data.interactions.iter().filter(|r| r.session_id == "hh-1").count(), 12);
    let surveys = load_surveys(tables.questionnaires.as_bytes()).unwrap();
    assert_eq!(surveys.len(), 6);
    assert!(surveys.iter().all(|s| s.items.len() == 14 && s.norm_estimate.is_some()));
    assert_eq!(data.questionnaire_rows().len(), 6);
    assert_eq!(tables.payouts.lines().count(), 1 + 6);
}

#[test]
fn empty_and_incomplete_exports() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path());
    let empty = export_dataset(&store, &[]).unwrap();
    assert_eq!(empty.interactions, INTERACTION_COLUMNS.join(",") + "\n");
    assert_eq!(empty.questionnaires.lines().count(), 1);
    assert_eq!(empty.payouts.lines().count(), 1);

    // Registered but never run.
    let cfg = config(Pairing::HC, 2, 0);
    store.create("pending", &cfg, &numbered_roster(2)).unwrap();
    let err = export_dataset(&store, &["pending".to_string()]).unwrap_err();
    assert!(matches!(err, OrchestratorError::SessionIncomplete(_)), "{err}");

    // Cut off mid-session.
    simulate_into(&store, "cut", Pairing::HC, 2, 2);
    let path = store.events_path("cut");
    let events = read_events(&path).unwrap();
    write_events(&path, &events[..events.len() / 2]).unwrap();
    let err = export_dataset(&store, &["cut".to_string()]).unwrap_err();
    assert!(matches!(err, OrchestratorError::SessionIncomplete(_)), "{err}");

    assert!(store.create("cut", &cfg, &numbered_roster(2)).is_err(), "ids are unique");
}

#[test]
fn session_over_tcp_runs_to_completion_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let events_path = dir.path().join("events.jsonl");
    let mut cfg = config(Pairing::HF, 2, 3);
    cfg.timers = StageTimers {
        compose_ms: 1_500,
        read_ms: 100,
        decide_ms: 1_500,
        results_ms: 100,
    };
    cfg.questionnaire_battery = vec!["norm_estimate".into(), "humanness".into()];
    let roster = numbered_roster(1);
    let session = Session::new("tcp", cfg.clone(), roster.clone(), dilemma_orchestrator::server::epoch_ms()).unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let backend: Arc<MockBackend> = Arc::new(MockBackend::new(MockConfig::default()));
    let path = events_path.clone();
    let server = thread::spawn(move || {
        serve(
            listener,
            session,
            backend,
            ServeOptions {
                events_path: Some(path),
                auto_start: true,
            },
        )
    });

    let stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut send = |m: &ClientMessage| {
        writer.write_all(m.encode().as_bytes()).unwrap();
        writer.write_all(b"\n").unwrap();
    };
    // A bad token is refused without closing the connection.
    send(&ClientMessage::Join { token: "nope".into() });
    // Submissions before joining are refused too.
    send(&ClientMessage::MessageText { text: "hi".into() });
    let mut client = ScriptedClient::new(
        roster[0].token.clone(),
        1,
        HumanPolicy {
            think_ms: 0,
            ..HumanPolicy::default()
        },
        &cfg,
    );
    send(&client.join());

    let mut errors = Vec::new();
    let mut results = 0;
    let mut finished = None;
    for line in BufReader::new(stream).lines() {
        let message = ServerMessage::decode(&line.unwrap()).unwrap();
        match &message {
            ServerMessage::Error { code, .. } => errors.push(code.clone()),
            ServerMessage::RoundResult { .. } => results += 1,
            ServerMessage::StageEnter {
                stage: ClientStage::Finished,
                payload,
                ..
            } => finished = Some(payload.clone()),
            _ => {}
        }
        for action in client.react(&message) {
            if let dilemma_orchestrator::simulate::ClientAction::Send { message, .. } = action {
                send(&message);
            }
        }
        if finished.is_some() {
            break;
        }
    }
    let result = server.join().unwrap().unwrap();
    assert_eq!(errors, ["unknown_token", "not_joined"]);
    assert_eq!(results, 2);
    assert!(finished.is_some());
    let events = read_events(&events_path).unwrap();
    assert_eq!(replay(&events).unwrap(), result);
    assert_eq!(result.participants[0].interactions.len(), 2);
    assert!(result.participants[0].questionnaire.is_some());
}
