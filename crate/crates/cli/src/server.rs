//! Streams snapshots to connected clients and serves their requests.
//!
//! One listener accepts both plain newline-delimited JSON over TCP and
//! WebSocket connections (one JSON message per text frame); a connection
//! that opens with an HTTP `GET` is upgraded, anything else is plain.

use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use crate::protocol::Session;

enum Event {
    Join(u64, Sender<String>),
    Leave(u64),
    Request(u64, String),
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the server stops.
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and starts the tick loop, which advances the arena every
/// `tick` and fans each new snapshot out to all clients. Requests are
/// handled on the tick loop between ticks, in arrival order.
pub fn spawn(session: Session, addr: &str, tick: Duration) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();

    let sim = {
        let stop = stop.clone();
        thread::spawn(move || tick_loop(session, rx, tick, &stop))
    };
    let acceptor = {
        let stop = stop.clone();
        thread::spawn(move || {
            let mut next_id = 0u64;
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let tx = tx.clone();
                        let id = next_id;
                        next_id += 1;
                        thread::spawn(move || {
                            let _ = serve_client(stream, id, tx);
                        });
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(10))
                    }
                    Err(_) => thread::sleep(Duration::from_millis(10)),
                }
            }
        })
    };
    Ok(ServerHandle {
        addr: local,
        stop,
        threads: vec![sim, acceptor],
    })
}

fn tick_loop(mut session: Session, rx: Receiver<Event>, tick: Duration, stop: &AtomicBool) {
    let mut clients: Vec<(u64, Sender<String>)> = Vec::new();
    let mut deadline = Instant::now() + tick;
    while !stop.load(Ordering::SeqCst) {
        let wait = deadline
            .saturating_duration_since(Instant::now())
            .min(Duration::from_millis(50));
        match rx.recv_timeout(wait) {
            Ok(Event::Join(id, out)) => {
                let _ = out.send(session.snapshot_message().to_line());
                clients.push((id, out));
            }
            Ok(Event::Leave(id)) => clients.retain(|(c, _)| *c != id),
            Ok(Event::Request(id, line)) => {
                let reply = session.handle_line(&line).to_line();
                if let Some((_, out)) = clients.iter().find(|(c, _)| *c == id) {
                    let _ = out.send(reply);
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if Instant::now() >= deadline {
            deadline += tick;
            if let Some(msg) = session.advance() {
                let line = msg.to_line();
                clients.retain(|(_, out)| out.send(line.clone()).is_ok());
            }
        }
    }
}

fn serve_client(stream: TcpStream, id: u64, events: Sender<Event>) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(250)))?;
    let mut head = [0u8; 4];
    let is_ws = matches!(stream.peek(&mut head), Ok(4) if &head == b"GET ");
    stream.set_read_timeout(None)?;
    let (out_tx, out_rx) = mpsc::channel();
    if events.send(Event::Join(id, out_tx)).is_err() {
        return Ok(());
    }
    let result = if is_ws {
        serve_websocket(stream, id, &events, out_rx)
    } else {
        serve_lines(stream, id, &events, out_rx)
    };
    let _ = events.send(Event::Leave(id));
    result
}

fn serve_lines(
    stream: TcpStream,
    id: u64,
    events: &Sender<Event>,
    out: Receiver<String>,
) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let requests = events.clone();
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if !line.trim().is_empty() && requests.send(Event::Request(id, line)).is_err() {
                break;
            }
        }
        let _ = requests.send(Event::Leave(id));
    });
    let mut writer = stream;
    for line in out {
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

fn serve_websocket(
    stream: TcpStream,
    id: u64,
    events: &Sender<Event>,
    out: Receiver<String>,
) -> io::Result<()> {
    let mut ws: WebSocket<TcpStream> =
        tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref()
        .set_read_timeout(Some(Duration::from_millis(10)))?;
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if events.send(Event::Request(id, text.to_string())).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return Ok(()),
        }
        loop {
            match out.try_recv() {
                Ok(line) => {
                    if ws.send(Message::text(line)).is_err() {
                        return Ok(());
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
}
