use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use blinkswarm::protocol::Session;
use blinkswarm::server;
use blinkswarm_core::chem::ChemTable;
use blinkswarm_core::sim::{Arena, ArenaConfig};
use serde_json::Value;
use tungstenite::Message;

fn water_session() -> Session {
    let cfg = ArenaConfig {
        step_length: 0.0,
        ..ArenaConfig::default()
    };
    let mut arena = Arena::new(cfg, Arc::new(ChemTable::builtin())).unwrap();
    let o = arena.add_atom("O", 0.5, 0.5).unwrap();
    let h1 = arena.add_atom("H", 0.53, 0.5).unwrap();
    let h2 = arena.add_atom("H", 0.47, 0.5).unwrap();
    arena.bond_pair(o, h1).unwrap();
    arena.bond_pair(o, h2).unwrap();
    Session::new(arena, "test-run")
}

struct Lines {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Lines {
    fn connect(addr: std::net::SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream
            .set_read_timeout(Some(Duration::from_secs(5)))
            .unwrap();
        Lines {
            reader: BufReader::new(stream.try_clone().unwrap()),
            writer: stream,
        }
    }

    fn send(&mut self, msg: &str) {
        self.writer.write_all(msg.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    fn next(&mut self) -> Value {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    }

    /// Skips broadcast snapshots until a message of type `kind` arrives.
    fn next_of(&mut self, kind: &str) -> Value {
        loop {
            let v = self.next();
            if v["type"] == kind {
                return v;
            }
        }
    }
}

#[test]
fn plain_tcp_session() {
    let handle = server::spawn(water_session(), "127.0.0.1:0", Duration::from_millis(20)).unwrap();
    let mut c = Lines::connect(handle.local_addr());

    let first = c.next();
    assert_eq!(first["type"], "snapshot");
    assert_eq!(first["run_id"], "test-run");
    assert!(first["tick"].is_u64());

    c.send(r#"{"type":"query","droplet_id":404}"#);
    let err = c.next_of("error");
    assert_eq!(err["code"], "not_found");
    assert!(err["tick"].is_u64() && err["run_id"] == "test-run");

    c.send(r#"{"type":"query","droplet_id":0}"#);
    let info = c.next_of("query_result");
    assert_eq!(info["droplet"]["symbol"], "O");
    assert_eq!(info["droplet"]["geometry"], "bent");

    c.send(r#"{"type":"command","command":{"kind":"break_molecule","group_id":0}}"#);
    // The reply to the command is a snapshot taken right after it applied;
    // broadcasts queued earlier may arrive first.
    let mut dissolved = false;
    for _ in 0..50 {
        let snap = c.next_of("snapshot");
        if snap["groups"].as_array().unwrap().is_empty() {
            dissolved = true;
            break;
        }
    }
    assert!(dissolved);

    let mut last = 0;
    for _ in 0..5 {
        let t = c.next_of("snapshot")["tick"].as_u64().unwrap();
        assert!(t >= last);
        last = t;
    }
    handle.shutdown();
}

#[test]
fn websocket_session() {
    let handle = server::spawn(water_session(), "127.0.0.1:0", Duration::from_millis(20)).unwrap();
    let url = format!("ws://{}/", handle.local_addr());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    let next = |ws: &mut tungstenite::WebSocket<_>, kind: &str| loop {
        if let Message::Text(t) = ws.read().unwrap() {
            let v: Value = serde_json::from_str(&t).unwrap();
            if v["type"] == kind {
                return v;
            }
        }
    };
    let first = next(&mut ws, "snapshot");
    assert_eq!(first["groups"][0]["formula"], "H2O");

    ws.send(Message::text(
        r#"{"type":"command","command":{"kind":"pause"}}"#,
    ))
    .unwrap();
    let paused_at = next(&mut ws, "snapshot")["tick"].as_u64().unwrap();
    ws.send(Message::text(
        r#"{"type":"command","command":{"kind":"step","ticks":1}}"#,
    ))
    .unwrap();
    let stepped = next(&mut ws, "snapshot")["tick"].as_u64().unwrap();
    assert_eq!(stepped, paused_at + 1);

    ws.send(Message::text(
        r#"{"type":"snapshot","run_id":"someone-else"}"#,
    ))
    .unwrap();
    assert_eq!(next(&mut ws, "error")["code"], "run_mismatch");
    ws.send(Message::text("not json")).unwrap();
    assert_eq!(next(&mut ws, "error")["code"], "bad_request");
    ws.send(Message::text(r#"{"type":"snapshot"}"#)).unwrap();
    assert_eq!(next(&mut ws, "snapshot")["tick"].as_u64().unwrap(), stepped);
    let _ = ws.close(None);
    handle.shutdown();
}
