//! Newline-delimited JSON over TCP. Connections are handled on a tokio
//! runtime; the session itself lives on one thread that owns the engine,
//! fires deadlines and appends every event to the log before any reply
//! goes out.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{mpsc, Arc};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use dilemma_agents::Backend;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::sync::mpsc as tmpsc;

use crate::error::OrchestratorError;
use crate::event::append_events;
use crate::protocol::{ClientMessage, ServerMessage};
use crate::result::SessionResult;
use crate::session::{Input, Session};
use crate::simulate::to_input;

pub fn epoch_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

enum Command {
    Open {
        conn: u64,
        tx: tmpsc::UnboundedSender<String>,
        writer: tokio::task::JoinHandle<()>,
    },
    Line { conn: u64, line: String },
    Closed { conn: u64 },
}

pub struct ServeOptions {
    /// Event log; events are appended as they happen.
    pub events_path: Option<PathBuf>,
    /// Start the quiz as soon as every participant has joined.
    pub auto_start: bool,
}

/// Runs `session` to completion on `listener` and returns its result.
pub fn serve(
    listener: std::net::TcpListener,
    mut session: Session,
    backend: Arc<dyn Backend>,
    options: ServeOptions,
) -> Result<SessionResult, OrchestratorError> {
    listener.set_nonblocking(true)?;
    let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = {
        let _guard = runtime.enter();
        tokio::net::TcpListener::from_std(listener)?
    };
    runtime.spawn(accept_loop(listener, cmd_tx));

    let log = |session: &mut Session| -> Result<(), OrchestratorError> {
        let events = session.drain_events();
        if let Some(path) = &options.events_path {
            append_events(path, &events)?;
        }
        Ok(())
    };
    log(&mut session)?;

    let mut conns: HashMap<u64, (Option<String>, tmpsc::UnboundedSender<String>)> = HashMap::new();
    let mut writers = Vec::new();
    let mut started = false;
    while !session.is_finished() {
        let wait = session
            .next_deadline()
            .map(|d| Duration::from_millis(d.saturating_sub(epoch_ms())))
            .unwrap_or(Duration::from_millis(500));
        let (input, from) = match cmd_rx.recv_timeout(wait) {
            Ok(Command::Open { conn, tx, writer }) => {
                conns.insert(conn, (None, tx));
                writers.push(writer);
                continue;
            }
            Ok(Command::Closed { conn }) => match conns.remove(&conn) {
                Some((Some(participant), _)) => (Input::Disconnect { participant }, None),
                _ => continue,
            },
            Ok(Command::Line { conn, line }) => {
                let reply = |m: ServerMessage| {
                    if let Some((_, tx)) = conns.get(&conn) {
                        let _ = tx.send(m.encode());
                    }
                };
                let message = match ClientMessage::decode(&line) {
                    Ok(m) => m,
                    Err(e) => {
                        reply(ServerMessage::Error {
                            code: "malformed".into(),
                            detail: e.to_string(),
                        });
                        continue;
                    }
                };
                let bound = conns.get(&conn).and_then(|(p, _)| p.clone());
                match (&message, bound) {
                    (ClientMessage::Join { token }, _) => {
                        if let Some(p) = session.participant_for_token(token) {
                            let p = p.to_string();
                            // A newer connection replaces an older one.
                            conns.retain(|&c, (q, _)| c == conn || q.as_deref() != Some(p.as_str()));
                            if let Some(entry) = conns.get_mut(&conn) {
                                entry.0 = Some(p);
                            }
                        }
                        (to_input(message, String::new()), Some(conn))
                    }
                    (_, Some(participant)) => (to_input(message, participant), Some(conn)),
                    (_, None) => {
                        reply(ServerMessage::Error {
                            code: "not_joined".into(),
                            detail: "send join first".into(),
                        });
                        continue;
                    }
                }
            }
            Err(mpsc::RecvTimeoutError::Timeout) => (Input::Tick, None),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(OrchestratorError::SessionIncomplete(session.id().to_string()))
            }
        };
        let now = epoch_ms();
        let result = session.handle(now, input, backend.as_ref());
        log(&mut session)?;
        match result {
            Ok(out) => {
                for o in out {
                    let line = o.message.encode();
                    for (p, tx) in conns.values() {
                        if p.as_deref() == Some(o.to.as_str()) {
                            let _ = tx.send(line.clone());
                        }
                    }
                }
            }
            Err(e) => {
                tracing::debug!(error = %e, "input rejected");
                if let Some((_, tx)) = from.and_then(|c| conns.get(&c)) {
                    let _ = tx.send(
                        ServerMessage::Error {
                            code: e.code().into(),
                            detail: e.to_string(),
                        }
                        .encode(),
                    );
                }
            }
        }
        if options.auto_start && !started && session.all_joined() {
            started = true;
            let out = session.handle(epoch_ms(), Input::Start, backend.as_ref())?;
            log(&mut session)?;
            for o in out {
                for (p, tx) in conns.values() {
                    if p.as_deref() == Some(o.to.as_str()) {
                        let _ = tx.send(o.message.encode());
                    }
                }
            }
        }
    }
    // Dropping the senders lets the writers flush and close; runtime
    // shutdown would cancel them mid-write, so wait for them first.
    drop(conns);
    runtime.block_on(async {
        for writer in writers {
            let _ = tokio::time::timeout(Duration::from_secs(2), writer).await;
        }
    });
    runtime.shutdown_timeout(Duration::from_secs(2));
    Ok(session.result().cloned().expect("finished sessions have a result"))
}

async fn accept_loop(listener: tokio::net::TcpListener, cmd: mpsc::Sender<Command>) {
    let mut next = 0u64;
    loop {
        let Ok((stream, _)) = listener.accept().await else {
            return;
        };
        let conn = next;
        next += 1;
        let (read, mut write) = stream.into_split();
        let (tx, mut rx) = tmpsc::unbounded_channel::<String>();
        let writer = tokio::spawn(async move {
            while let Some(line) = rx.recv().await {
                if write.write_all(line.as_bytes()).await.is_err() || write.write_all(b"\n").await.is_err() {
                    break;
                }
            }
            let _ = write.shutdown().await;
        });
        if cmd.send(Command::Open { conn, tx, writer }).is_err() {
            return;
        }
        let cmd = cmd.clone();
        tokio::spawn(async move {
            let mut lines = BufReader::new(read).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                if !line.trim().is_empty() && cmd.send(Command::Line { conn, line }).is_err() {
                    return;
                }
            }
            let _ = cmd.send(Command::Closed { conn });
        });
    }
}
