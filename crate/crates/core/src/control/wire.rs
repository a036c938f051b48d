use std::io::{self, BufRead, Write};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{err, Command, ControlError, ControlPlane, ErrorCode, Outcome, Verb};
use crate::model::PortConfig;

/// One request line: `op` is `get-state`, `edit-config` or `rpc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: Value,
    pub token: String,
    pub op: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Value,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    fn from_result(id: Value, r: Result<Value, ControlError>) -> Self {
        match r {
            Ok(v) => Self { id, status: "ok".into(), result: Some(v), error: None },
            Err(e) => Self { id, status: "error".into(), result: None, error: Some(ErrorBody { code: e.code, detail: e.detail }) },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn to_value(o: Outcome) -> Value {
    serde_json::to_value(o).expect("outcome serializes")
}

fn invalid(e: impl std::fmt::Display) -> ControlError {
    ControlError::new(ErrorCode::Invalid, e.to_string())
}

/// What the caller may see: its capabilities, the leases and delegations
/// it is party to, and configs of ports it may read.
fn get_state(cp: &ControlPlane, token: &str, params: &Value) -> Result<Value, ControlError> {
    let session = cp.authenticate(token)?;
    let me = session.operator.as_str();
    if let Some(port) = params.get("port").and_then(Value::as_str) {
        if !cp.inventory().ports.contains_key(port) {
            return err(ErrorCode::NotFound, format!("port {port}"));
        }
        if !session.allows(&format!("port:{port}"), Verb::ReadState) {
            return err(ErrorCode::Denied, format!("{me} may not read port {port}"));
        }
        return Ok(json!({ "port": port, "config": cp.port_configs().get(port) }));
    }
    let configs: serde_json::Map<String, Value> = cp
        .port_configs()
        .iter()
        .filter(|(p, _)| session.allows(&format!("port:{p}"), Verb::ReadState))
        .map(|(p, c)| (p.clone(), serde_json::to_value(c).expect("config serializes")))
        .collect();
    Ok(json!({
        "operator": me,
        "clock_ms": cp.clock_ms(),
        "capabilities": session.capabilities,
        "leases": cp.leases().values().filter(|l| l.lessor == me || l.lessee == me).collect::<Vec<_>>(),
        "delegations": cp.delegations().values().filter(|c| c.owner == me || c.tenant == me).collect::<Vec<_>>(),
        "port_configs": configs,
    }))
}

/// Dispatches one request against the state.
pub fn handle_request(cp: &mut ControlPlane, req: &Request) -> Response {
    let result = match req.op.as_str() {
        "get-state" => get_state(cp, &req.token, &req.params),
        "edit-config" => {
            let port = req.params.get("port").and_then(Value::as_str).map(str::to_string);
            let mut cfg = req.params.clone();
            if let Some(o) = cfg.as_object_mut() {
                o.remove("port");
            }
            match (port, serde_json::from_value::<PortConfig>(cfg)) {
                (Some(port), Ok(config)) => cp.execute(&req.token, Command::ConfigurePort { port, config }).map(to_value),
                (None, _) => Err(invalid("edit-config needs a port")),
                (_, Err(e)) => Err(invalid(e)),
            }
        }
        "rpc" => {
            let mut p = req.params.clone();
            match p.as_object_mut().and_then(|o| o.remove("method").map(|m| (o, m))) {
                Some((o, m)) => {
                    o.insert("cmd".into(), m);
                    match serde_json::from_value::<Command>(p) {
                        Ok(cmd) => cp.execute(&req.token, cmd).map(to_value),
                        Err(e) => Err(invalid(e)),
                    }
                }
                None => Err(invalid("rpc needs a method")),
            }
        }
        other => Err(invalid(format!("unknown op '{other}'"))),
    };
    Response::from_result(req.id.clone(), result)
}

enum Message {
    Request(Request, mpsc::Sender<Response>),
    Admin(Command, mpsc::Sender<Result<Outcome, ControlError>>),
    Snapshot(mpsc::Sender<ControlPlane>),
}

/// Runs a control plane on its own thread. Every request, from any
/// number of handles, is applied in arrival order on that thread.
pub struct ControlPlaneService;

#[derive(Clone)]
pub struct ServiceHandle {
    tx: mpsc::Sender<Message>,
}

impl ControlPlaneService {
    /// The join handle yields the final state once every handle is dropped.
    pub fn spawn(mut cp: ControlPlane) -> (ServiceHandle, thread::JoinHandle<ControlPlane>) {
        let (tx, rx) = mpsc::channel::<Message>();
        let join = thread::spawn(move || {
            for msg in rx {
                match msg {
                    Message::Request(req, reply) => {
                        let _ = reply.send(handle_request(&mut cp, &req));
                    }
                    Message::Admin(cmd, reply) => {
                        let _ = reply.send(cp.execute_admin(cmd));
                    }
                    Message::Snapshot(reply) => {
                        let _ = reply.send(cp.clone());
                    }
                }
            }
            cp
        });
        (ServiceHandle { tx }, join)
    }
}

fn stopped() -> ControlError {
    ControlError::new(ErrorCode::Invalid, "control plane stopped")
}

impl ServiceHandle {
    pub fn call(&self, req: Request) -> Response {
        let id = req.id.clone();
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Message::Request(req, tx)).is_err() {
            return Response::from_result(id, Err(stopped()));
        }
        rx.recv().unwrap_or_else(|_| Response::from_result(id, Err(stopped())))
    }

    pub fn admin(&self, cmd: Command) -> Result<Outcome, ControlError> {
        let (tx, rx) = mpsc::channel();
        self.tx.send(Message::Admin(cmd, tx)).map_err(|_| stopped())?;
        rx.recv().map_err(|_| stopped())?
    }

    pub fn snapshot(&self) -> Option<ControlPlane> {
        let (tx, rx) = mpsc::channel();
        self.tx.send(Message::Snapshot(tx)).ok()?;
        rx.recv().ok()
    }
}

/// Serves newline-delimited JSON requests from `reader`, one response line
/// per request, until end of input.
pub fn serve_stream(handle: &ServiceHandle, reader: impl BufRead, mut writer: impl Write) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Ok(req) => handle.call(req),
            Err(e) => Response::from_result(Value::Null, Err(invalid(e))),
        };
        writeln!(writer, "{}", serde_json::to_string(&resp).expect("response serializes"))?;
        writer.flush()?;
    }
    Ok(())
}
