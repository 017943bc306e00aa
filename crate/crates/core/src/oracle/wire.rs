//! Line-oriented TCP front end for an oracle, emulating a remote prediction
//! API. One JSON object per line in, one per line out. All metering and
//! logging funnels through a single thread that owns the oracle, so
//! concurrent clients observe one linearizable query counter.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::feature::PartialFeatureVector;
use crate::oracle::{Oracle, OracleResponse, QueryOracle};

#[derive(Debug, Deserialize)]
struct WireRequest {
    op: String,
    x: Vec<Option<f64>>,
    source: String,
}

struct Job {
    req: WireRequest,
    reply: Sender<String>,
}

fn response_line(r: &OracleResponse) -> String {
    match r {
        OracleResponse::Confidence { label, conf } => {
            json!({"ok": true, "label": label, "conf": conf}).to_string()
        }
        OracleResponse::Label { label } => json!({"ok": true, "label": label}).to_string(),
        OracleResponse::TreeId { node_id } => {
            json!({"ok": true, "node_id": node_id}).to_string()
        }
    }
}

fn error_line(err: &Error) -> String {
    let code = match err {
        Error::BudgetExhausted => "budget_exhausted",
        Error::WrongMode => "wrong_mode",
        _ => "malformed",
    };
    json!({"ok": false, "err": code}).to_string()
}

fn handle_job(oracle: &mut Oracle, req: &WireRequest) -> String {
    let px = PartialFeatureVector(req.x.clone());
    let outcome = match req.op.as_str() {
        "query" => match px.as_complete() {
            Some(x) => oracle.query(&x, &req.source),
            None => Err(Error::Protocol("query with unset coordinates".into())),
        },
        "query_partial" => oracle.query_partial(&px, &req.source),
        _ => Err(Error::Protocol(format!("unknown op {:?}", req.op))),
    };
    match outcome {
        Ok(r) => response_line(&r),
        Err(e) => error_line(&e),
    }
}

fn client_loop(stream: TcpStream, jobs: Sender<Job>) {
    let Ok(read_half) = stream.try_clone() else {
        return;
    };
    let mut writer = stream;
    let reader = BufReader::new(read_half);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<WireRequest>(&line) {
            Err(_) => json!({"ok": false, "err": "malformed"}).to_string(),
            Ok(req) => {
                let (rtx, rrx) = mpsc::channel();
                if jobs.send(Job { req, reply: rtx }).is_err() {
                    break; // server shut down
                }
                match rrx.recv() {
                    Ok(reply) => reply,
                    Err(_) => break,
                }
            }
        };
        if writeln!(writer, "{reply}").is_err() {
            break;
        }
    }
}

/// A running oracle service. Dropping it without [`OracleServer::stop`]
/// leaves the serving thread alive until process exit.
pub struct OracleServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: JoinHandle<Oracle>,
}

impl OracleServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Signal shutdown and hand back the oracle with its accumulated log.
    pub fn stop(self) -> Result<Oracle> {
        self.shutdown.store(true, Ordering::SeqCst);
        self.handle
            .join()
            .map_err(|_| Error::Protocol("oracle server thread panicked".into()))
    }
}

/// Serve `oracle` on `addr` (e.g. "127.0.0.1:0" for an ephemeral port)
/// until stopped. Malformed request lines are answered in place and never
/// reach the oracle: not metered, not logged.
pub fn serve(oracle: Oracle, addr: &str) -> Result<OracleServer> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&shutdown);
    let (tx, rx) = mpsc::channel::<Job>();
    let handle = thread::spawn(move || {
        let mut oracle = oracle;
        while !flag.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let jobs = tx.clone();
                    thread::spawn(move || client_loop(stream, jobs));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {}
                Err(_) => {}
            }
            // drain the request queue; timeout doubles as the accept poll rate
            while let Ok(job) = rx.recv_timeout(Duration::from_millis(1)) {
                let reply = handle_job(&mut oracle, &job.req);
                let _ = job.reply.send(reply);
            }
        }
        oracle
    });
    // wait here so a bound server is usable the moment this returns
    Ok(OracleServer {
        addr: local,
        shutdown,
        handle,
    })
}

/// Client side of the wire protocol. Implements [`QueryOracle`], so every
/// attack in this crate can run against a remote oracle unchanged.
pub struct WireClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    accepted: u64,
}

impl WireClient {
    pub fn connect(addr: &SocketAddr) -> Result<WireClient> {
        let stream = TcpStream::connect(addr)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(WireClient {
            reader,
            writer: stream,
            accepted: 0,
        })
    }

    fn round_trip(&mut self, op: &str, x: &[Option<f64>], source: &str) -> Result<OracleResponse> {
        let line = json!({"op": op, "x": x, "source": source}).to_string();
        writeln!(self.writer, "{line}")?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(Error::Protocol("server closed the connection".into()));
        }
        let v: serde_json::Value = serde_json::from_str(&reply)
            .map_err(|e| Error::Protocol(format!("bad reply line: {e}")))?;
        if v["ok"] == serde_json::Value::Bool(true) {
            let response = if let Some(node_id) = v["node_id"].as_u64() {
                OracleResponse::TreeId { node_id }
            } else {
                let label = v["label"]
                    .as_u64()
                    .ok_or_else(|| Error::Protocol("reply without label".into()))?
                    as usize;
                match v.get("conf").and_then(|c| c.as_array()) {
                    Some(arr) => OracleResponse::Confidence {
                        label,
                        conf: arr.iter().filter_map(|x| x.as_f64()).collect(),
                    },
                    None => OracleResponse::Label { label },
                }
            };
            self.accepted += 1;
            Ok(response)
        } else {
            match v["err"].as_str() {
                Some("budget_exhausted") => Err(Error::BudgetExhausted),
                Some("wrong_mode") => Err(Error::WrongMode),
                Some(other) => Err(Error::Protocol(format!("server rejected request: {other}"))),
                None => Err(Error::Protocol("reply without error code".into())),
            }
        }
    }
}

impl QueryOracle for WireClient {
    fn query(&mut self, x: &[f64], source: &str) -> Result<OracleResponse> {
        let opt: Vec<Option<f64>> = x.iter().copied().map(Some).collect();
        self.round_trip("query", &opt, source)
    }

    fn query_partial(
        &mut self,
        px: &PartialFeatureVector,
        source: &str,
    ) -> Result<OracleResponse> {
        self.round_trip("query_partial", &px.0, source)
    }

    fn accepted(&self) -> u64 {
        self.accepted
    }
}
