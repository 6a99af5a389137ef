//! JSON-lines client for backward models running out of process.
//!
//! Request: `{"id": 1, "smiles": "CCO", "num_results": 10}`
//! Response: `{"id": 1, "predictions": [{"reactants": ["CC", "O"], "probability": 0.7}]}`
//!
//! One request is in flight per connection. A server may answer with
//! `{"id": 1, "error": "..."}`, which surfaces as a protocol error.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{BackwardModel, GatewayError, RawPrediction};
use crate::molkit::Molecule;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    smiles: &'a str,
    num_results: usize,
}

pub struct WireClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    next_id: u64,
    timeout: Duration,
    broken: bool,
}

impl std::fmt::Debug for WireClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WireClient")
            .field("next_id", &self.next_id)
            .field("timeout", &self.timeout)
            .field("broken", &self.broken)
            .finish()
    }
}

fn spawn_reader(input: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(input).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl WireClient {
    /// Starts `program` and talks to it over its standard streams.
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, GatewayError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| GatewayError::ModelUnavailable(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            writer: Box::new(stdin),
            lines: spawn_reader(stdout),
            child: Some(child),
            next_id: 1,
            timeout,
            broken: false,
        })
    }

    /// Connects to a server listening on `addr` (`host:port`).
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| GatewayError::ModelUnavailable(format!("cannot connect to {addr}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let read = stream
            .try_clone()
            .map_err(|e| GatewayError::ModelUnavailable(e.to_string()))?;
        Ok(Self {
            writer: Box::new(stream),
            lines: spawn_reader(read),
            child: None,
            next_id: 1,
            timeout,
            broken: false,
        })
    }

    pub fn query(&mut self, smiles: &str, num_results: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        if self.broken {
            return Err(GatewayError::ModelUnavailable("connection previously failed".into()));
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request { id, smiles, num_results }).expect("request serializes");
        line.push('\n');
        if let Err(e) = self.writer.write_all(line.as_bytes()).and_then(|_| self.writer.flush()) {
            self.broken = true;
            return Err(GatewayError::ModelUnavailable(format!("write failed: {e}")));
        }
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                self.broken = true;
                return Err(GatewayError::ModelUnavailable(format!("read failed: {e}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                // A late answer would desynchronize ids, so give up on the connection.
                self.broken = true;
                return Err(GatewayError::ModelUnavailable(format!("no response within {:?}", self.timeout)));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                return Err(GatewayError::ModelUnavailable("model closed the connection".into()));
            }
        };
        let mut preds = parse_response(&reply, id)?;
        preds.truncate(num_results);
        Ok(preds)
    }
}

impl Drop for WireClient {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Parses one response line, checking that it answers request `id`.
pub fn parse_response(line: &str, id: u64) -> Result<Vec<RawPrediction>, GatewayError> {
    let proto = |m: String| Err(GatewayError::Protocol(m));
    let v: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return proto(format!("invalid JSON: {e}")),
    };
    let Some(obj) = v.as_object() else {
        return proto("response is not an object".into());
    };
    if obj.get("id").and_then(Value::as_u64) != Some(id) {
        return proto(format!("expected id {id}, got {:?}", obj.get("id")));
    }
    if let Some(err) = obj.get("error") {
        return proto(format!("model error: {err}"));
    }
    let Some(list) = obj.get("predictions").and_then(Value::as_array) else {
        return proto("missing \"predictions\" array".into());
    };
    let mut out = Vec::with_capacity(list.len());
    for p in list {
        let reactants = p.get("reactants").and_then(Value::as_array).and_then(|rs| {
            rs.iter()
                .map(|r| r.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
        });
        let probability = p.get("probability").and_then(Value::as_f64);
        match (reactants, probability) {
            (Some(reactants), Some(probability)) => out.push(RawPrediction { reactants, probability }),
            _ => return proto(format!("malformed prediction {p}")),
        }
    }
    Ok(out)
}

/// A [`BackwardModel`] backed by a wire connection.
pub struct WireModel {
    name: String,
    client: Mutex<WireClient>,
}

impl WireModel {
    pub fn new(name: impl Into<String>, client: WireClient) -> Self {
        Self {
            name: name.into(),
            client: Mutex::new(client),
        }
    }
}

impl BackwardModel for WireModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn query(&self, product: &Molecule, num_results: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        let mut client = self
            .client
            .lock()
            .map_err(|_| GatewayError::ModelUnavailable("client poisoned".into()))?;
        client.query(&product.id, num_results)
    }
}
