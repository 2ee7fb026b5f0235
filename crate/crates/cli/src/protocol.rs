//! Server wire messages and the transport-free request handler.
//!
//! Every message is one JSON object with a `type` field. Server messages
//! always carry the arena `tick` they describe and the `run_id`; client
//! messages may carry both, and a mismatching `run_id` is refused.

use blinkswarm_core::observer::{query_droplet, DropletInfo, ObserverError};
use blinkswarm_core::sim::{Arena, Command, Snapshot};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Request the current snapshot.
    Snapshot {
        #[serde(default)]
        tick: Option<u64>,
        #[serde(default)]
        run_id: Option<String>,
    },
    Command {
        #[serde(default)]
        tick: Option<u64>,
        #[serde(default)]
        run_id: Option<String>,
        command: Command,
    },
    Query {
        #[serde(default)]
        tick: Option<u64>,
        #[serde(default)]
        run_id: Option<String>,
        droplet_id: u32,
    },
}

impl ClientMessage {
    fn run_id(&self) -> Option<&str> {
        match self {
            ClientMessage::Snapshot { run_id, .. }
            | ClientMessage::Command { run_id, .. }
            | ClientMessage::Query { run_id, .. } => run_id.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    Rejected,
    NotFound,
    RunMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot {
        run_id: String,
        #[serde(flatten)]
        snapshot: Snapshot,
    },
    QueryResult {
        tick: u64,
        run_id: String,
        droplet: DropletInfo,
    },
    Error {
        tick: u64,
        run_id: String,
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn tick(&self) -> u64 {
        match self {
            ServerMessage::Snapshot { snapshot, .. } => snapshot.tick,
            ServerMessage::QueryResult { tick, .. } | ServerMessage::Error { tick, .. } => *tick,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Owns the arena on the server side.
pub struct Session {
    arena: Arena,
    run_id: String,
}

impl Session {
    pub fn new(arena: Arena, run_id: impl Into<String>) -> Self {
        Session {
            arena,
            run_id: run_id.into(),
        }
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn snapshot_message(&self) -> ServerMessage {
        ServerMessage::Snapshot {
            run_id: self.run_id.clone(),
            snapshot: self.arena.snapshot(),
        }
    }

    /// Advances one tick unless paused; returns the new snapshot if the
    /// arena moved.
    pub fn advance(&mut self) -> Option<ServerMessage> {
        if self.arena.is_paused() {
            return None;
        }
        self.arena.tick();
        Some(self.snapshot_message())
    }

    fn error(&self, code: ErrorCode, message: impl Into<String>) -> ServerMessage {
        ServerMessage::Error {
            tick: self.arena.tick_count(),
            run_id: self.run_id.clone(),
            code,
            message: message.into(),
        }
    }

    /// Handles one raw request line.
    pub fn handle_line(&mut self, line: &str) -> ServerMessage {
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.error(ErrorCode::BadRequest, e.to_string()),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> ServerMessage {
        if let Some(id) = msg.run_id().filter(|id| *id != self.run_id) {
            return self.error(
                ErrorCode::RunMismatch,
                format!("this server runs {}, not {id}", self.run_id),
            );
        }
        match msg {
            ClientMessage::Snapshot { .. } => self.snapshot_message(),
            ClientMessage::Command { command, .. } => match self.arena.apply_command(&command) {
                Ok(()) => self.snapshot_message(),
                Err(e) => self.error(ErrorCode::Rejected, e.to_string()),
            },
            ClientMessage::Query { droplet_id, .. } => {
                let snap = self.arena.snapshot();
                match query_droplet(&snap, self.arena.table(), droplet_id) {
                    Ok(droplet) => ServerMessage::QueryResult {
                        tick: snap.tick,
                        run_id: self.run_id.clone(),
                        droplet,
                    },
                    Err(e @ ObserverError::NotFound(_)) => {
                        self.error(ErrorCode::NotFound, e.to_string())
                    }
                    Err(e) => self.error(ErrorCode::Rejected, e.to_string()),
                }
            }
        }
    }
}
