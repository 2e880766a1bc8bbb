use std::net::TcpListener;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dilemma_core::{Labeling, Pairing};
use dilemma_orchestrator::event::{read_events, write_events};
use dilemma_orchestrator::server::{epoch_ms, serve, ServeOptions};
use dilemma_orchestrator::{
    export_dataset, replay, run_simulated, Event, HumanPolicy, OrchestratorError, Participant, Session,
    SessionConfig, SessionStore, Treatment,
};
use rand::distr::{Alphanumeric, SampleString};

#[derive(Parser)]
#[command(name = "orchestrator", about = "Run timed dilemma sessions with humans and agents")]
struct Cli {
    /// Directory holding one sub-directory per session.
    #[arg(long, default_value = "sessions", global = true)]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a default session configuration.
    InitConfig {
        #[arg(long, default_value = "HF")]
        pairing: Pairing,
        #[arg(long, default_value = "informed", value_parser = parse_labeling)]
        labeling: Labeling,
        #[arg(long)]
        no_communication: bool,
    },
    /// Register a session and print its participants' join tokens.
    CreateSession {
        #[arg(long)]
        id: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        participants: usize,
    },
    /// Run a registered session, either on a socket or with scripted participants.
    Start {
        #[arg(long)]
        id: String,
        /// Address to listen on, e.g. 127.0.0.1:7400.
        #[arg(long, conflicts_with = "simulate")]
        listen: Option<String>,
        /// Play the session with scripted participants on a mock clock.
        #[arg(long)]
        simulate: bool,
        /// Cooperation probability of scripted participants.
        #[arg(long, default_value_t = 0.7)]
        cooperate: f64,
    },
    /// Summarize a session's event log.
    Status {
        #[arg(long)]
        id: String,
    },
    /// Replay finished sessions and write interactions, questionnaires and payouts.
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Sessions to export; all finished sessions when omitted.
        ids: Vec<String>,
    },
}

fn parse_labeling(s: &str) -> Result<Labeling, String> {
    match s {
        "informed" => Ok(Labeling::Informed),
        "uninformed" => Ok(Labeling::Uninformed),
        other => Err(format!("unknown labeling {other:?}")),
    }
}

fn main() -> Result<()> {
    tracing_subscriber_init();
    let cli = Cli::parse();
    let store = SessionStore::new(&cli.store);
    match cli.command {
        Command::InitConfig {
            pairing,
            labeling,
            no_communication,
        } => {
            let config = SessionConfig::new(Treatment {
                pairing,
                labeling,
                communication: !no_communication,
            });
            print!("{}", config.to_toml());
        }
        Command::CreateSession { id, config, participants } => {
            let config = SessionConfig::load(&config)?;
            let mut rng = rand::rng();
            let roster: Vec<Participant> = (1..=participants)
                .map(|i| Participant {
                    id: format!("p{i:02}"),
                    token: Alphanumeric.sample_string(&mut rng, 16),
                })
                .collect();
            // Reject impossible rosters before anything is written.
            Session::new(&id, config.clone(), roster.clone(), 0)?;
            let dir = store.create(&id, &config, &roster)?;
            println!("created {}", dir.display());
            for p in &roster {
                println!("{}\t{}", p.id, p.token);
            }
        }
        Command::Start {
            id,
            listen,
            simulate,
            cooperate,
        } => {
            let (config, roster) = store.load(&id)?;
            let events_path = store.events_path(&id);
            if events_path.exists() {
                bail!("session {id} already has an event log");
            }
            let backend = config.backend.build()?;
            let result = if simulate {
                let policy = HumanPolicy {
                    cooperate_prob: cooperate,
                    ..HumanPolicy::default()
                };
                let policies = vec![policy; roster.len()];
                let run = run_simulated(&id, config, &roster, &policies, backend.as_ref(), epoch_ms())?;
                write_events(&events_path, &run.events)?;
                run.result
            } else {
                let addr = listen.context("pass --listen ADDR or --simulate")?;
                let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                eprintln!("session {id} listening on {}", listener.local_addr()?);
                let session = Session::new(&id, config, roster, epoch_ms())?;
                serve(
                    listener,
                    session,
                    backend,
                    ServeOptions {
                        events_path: Some(events_path),
                        auto_start: true,
                    },
                )?
            };
            for p in &result.participants {
                println!("{}\t{} points\t{}", p.participant_id, p.total_points, p.payout);
            }
        }
        Command::Status { id } => {
            let events = read_events(&store.events_path(&id))?;
            let rounds = events
                .iter()
                .filter(|e| matches!(e.event, Event::RoundResult { .. }))
                .count();
            println!("{} events, {} round results", events.len(), rounds);
            match replay(&events) {
                Ok(result) => {
                    println!("finished");
                    for p in &result.participants {
                        println!("{}\t{} points\t{}", p.participant_id, p.total_points, p.payout);
                    }
                }
                Err(OrchestratorError::SessionIncomplete(_)) => println!("in progress"),
                Err(e) => return Err(e.into()),
            }
        }
        Command::Export { out, ids } => {
            let ids = if ids.is_empty() {
                store
                    .list()?
                    .into_iter()
                    .filter(|id| store.events(id).map(|e| replay(&e).is_ok()).unwrap_or(false))
                    .collect()
            } else {
                ids
            };
            export_dataset(&store, &ids)?.write_to(&out)?;
            println!("exported {} sessions to {}", ids.len(), out.display());
        }
    }
    Ok(())
}

fn tracing_subscriber_init() {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
}
