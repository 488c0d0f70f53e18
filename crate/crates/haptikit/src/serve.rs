//! WebSocket endpoint for one task-runner client.
//!
//! Client frames are JSON `sample` or `control` messages. Every display
//! frame the session produces is sent back as a `display` message. The
//! session log is written as the client drives it.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;

use crate::config::SessionConfig;
use crate::log::{Counters, JsonlWriter};
use crate::runner::SessionRunner;
use crate::synthetic::SessionFiles;
use crate::wire::{ClientMessage, ControlMessage, DisplayMessage, ServerMessage};
use crate::Error;

type FileRunner = SessionRunner<JsonlWriter<BufWriter<File>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeOutcome {
    pub files: SessionFiles,
    pub counters: Counters,
    pub completed: bool,
    /// Client frames that were not valid messages.
    pub malformed: u64,
}

pub async fn bind(port: u16) -> Result<(TcpListener, SocketAddr), Error> {
    let listener = TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| Error::Session(format!("bind port {port}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Session(format!("local address: {e}")))?;
    Ok((listener, addr))
}

/// Accepts one client and runs its session to the end or until it
/// disconnects. A trial still running at disconnect is aborted.
pub async fn serve_one(listener: TcpListener, config: SessionConfig, dir: &Path) -> Result<ServeOutcome, Error> {
    let files = prepare(&config, dir)?;
    let (stream, peer) = listener
        .accept()
        .await
        .map_err(|e| Error::Session(format!("accept: {e}")))?;
    log::info!("client connected from {peer}");
    // Samples and frames are small and latency-bound.
    if let Err(e) = stream.set_nodelay(true) {
        log::warn!("could not disable Nagle: {e}");
    }
    let ws = tokio_tungstenite::accept_async(stream)
        .await
        .map_err(|e| Error::Session(format!("websocket handshake: {e}")))?;
    let (mut tx, mut rx) = ws.split();

    let file = File::create(&files.log).map_err(|e| Error::io(&files.log, e))?;
    let mut runner = SessionRunner::new(config, JsonlWriter::new(BufWriter::new(file)))?;
    let mut malformed = 0;
    send(&mut tx, &runner.current_display()).await;

    while let Some(frame) = rx.next().await {
        let text = match frame {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) => break,
            Ok(_) => continue,
            Err(e) => {
                log::warn!("client stream error: {e}");
                break;
            }
        };
        let msg: ClientMessage = match serde_json::from_str(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("ignoring malformed frame: {e}");
                malformed += 1;
                continue;
            }
        };
        for display in handle(&mut runner, &msg)? {
            send(&mut tx, &display).await;
        }
        if runner.is_done() {
            break;
        }
    }

    if runner.active_trial().is_some() {
        log::warn!("client left during trial {:?}; aborting it", runner.active_trial());
        runner.control(&ControlMessage::Abort, Some("disconnect"))?;
    }
    runner.finish()?;
    let _ = tx.close().await;
    Ok(ServeOutcome {
        files,
        counters: runner.counters(),
        completed: runner.is_done(),
        malformed,
    })
}

fn prepare(config: &SessionConfig, dir: &Path) -> Result<SessionFiles, Error> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SessionFiles {
        config: dir.join("session.config.json"),
        log: dir.join("session.log.jsonl"),
    };
    config.save(&files.config)?;
    Ok(files)
}

/// Display frames owed to the client after one message.
fn handle(runner: &mut FileRunner, msg: &ClientMessage) -> Result<Vec<DisplayMessage>, Error> {
    match msg {
        ClientMessage::Sample(sample) => Ok(runner.ingest(sample)?.displays),
        ClientMessage::Control(control) => {
            let notice = runner.rejection_reason(control);
            runner.control(control, None)?;
            let mut display = runner.current_display();
            if display.notice.is_none() {
                display.notice = notice;
            }
            Ok(vec![display])
        }
    }
}

async fn send<S>(tx: &mut S, display: &DisplayMessage)
where
    S: SinkExt<Message> + Unpin,
{
    let msg = ServerMessage::Display(display.clone());
    match serde_json::to_string(&msg) {
        Ok(text) => {
            if tx.send(Message::text(text)).await.is_err() {
                log::debug!("display dropped; client gone");
            }
        }
        Err(e) => log::error!("display encode failed: {e}"),
    }
}

/// Output directory for a served session: the config's own, else `fallback`.
pub fn output_dir(config: &SessionConfig, fallback: &Path) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| fallback.to_path_buf())
}
