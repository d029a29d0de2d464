//! Client side of the sandbox pipe protocol.
//!
//! One process per request: the request is written as a single JSON line on
//! the child's stdin, and the child answers with one JSON line on stdout and
//! exits with 0 (ok), 2 (syntax error), 3 (runtime error) or 4 (resource
//! limit). The parent kills the child when the deadline passes.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use dcc_core::greedy::Component;
use dcc_core::PriorityValue;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SYNTAX: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxCommand {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SandboxRequest {
    pub source: String,
    pub graph_path: Option<PathBuf>,
    pub n: usize,
    pub s: usize,
    pub vertices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SandboxResponse {
    pub status: String,
    #[serde(default)]
    pub priorities: Option<Vec<Value>>,
    #[serde(default)]
    pub error_kind: Option<String>,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Syntax,
    Runtime,
    Resource,
}

impl FailureKind {
    pub fn from_exit_code(code: i32) -> Option<Self> {
        match code {
            EXIT_SYNTAX => Some(FailureKind::Syntax),
            EXIT_RUNTIME => Some(FailureKind::Runtime),
            EXIT_RESOURCE => Some(FailureKind::Resource),
            _ => None,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Syntax => EXIT_SYNTAX,
            FailureKind::Runtime => EXIT_RUNTIME,
            FailureKind::Resource => EXIT_RESOURCE,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("candidate failed ({kind:?}): {message}")]
    Candidate { kind: FailureKind, message: String },
    #[error("sandbox exceeded its deadline")]
    Timeout,
    #[error("evaluation cancelled")]
    Cancelled,
    #[error("could not run sandbox: {0}")]
    Spawn(std::io::Error),
    #[error("sandbox protocol violation: {0}")]
    Protocol(String),
    #[error("invalid priority value: {0}")]
    Priority(String),
}

impl SandboxCommand {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self { program: program.into(), args: Vec::new() }
    }

    /// Runs one request, polling for the deadline and the cancel flag.
    pub fn run(
        &self,
        request: &SandboxRequest,
        deadline: Instant,
        cancel: Option<&AtomicBool>,
    ) -> Result<Vec<PriorityValue>, SandboxError> {
        let mut line = serde_json::to_vec(request).map_err(|e| SandboxError::Protocol(e.to_string()))?;
        line.push(b'\n');
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(SandboxError::Spawn)?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            // a child that exits early closes the pipe; its exit code reports why
            let _ = stdin.write_all(&line);
        });
        let stdout = drain(child.stdout.take().expect("stdout is piped"));
        let stderr = drain(child.stderr.take().expect("stderr is piped"));

        let status = loop {
            if let Some(status) = child.try_wait().map_err(SandboxError::Spawn)? {
                break status;
            }
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                kill(&mut child);
                return Err(SandboxError::Cancelled);
            }
            if Instant::now() >= deadline {
                kill(&mut child);
                return Err(SandboxError::Timeout);
            }
            thread::sleep(Duration::from_millis(5));
        };
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = String::from_utf8_lossy(&stderr.join().unwrap_or_default()).trim().to_string();

        let code = status.code().unwrap_or(-1);
        if let Some(kind) = FailureKind::from_exit_code(code) {
            let message = parse_response(&stdout).ok().and_then(|r| r.message).unwrap_or(stderr);
            return Err(SandboxError::Candidate { kind, message });
        }
        if code != EXIT_OK {
            return Err(SandboxError::Protocol(format!("sandbox exited with {status}: {stderr}")));
        }
        let response = parse_response(&stdout)?;
        if response.status != "ok" {
            let kind = match response.error_kind.as_deref() {
                Some("syntax") => FailureKind::Syntax,
                Some("resource") => FailureKind::Resource,
                _ => FailureKind::Runtime,
            };
            return Err(SandboxError::Candidate { kind, message: response.message.unwrap_or_default() });
        }
        let values = response.priorities.ok_or_else(|| SandboxError::Protocol("ok response without priorities".into()))?;
        if values.len() != request.vertices.len() {
            return Err(SandboxError::Protocol(format!(
                "{} priorities for {} vertices",
                values.len(),
                request.vertices.len()
            )));
        }
        values.iter().map(decode_priority).collect()
    }
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

fn kill(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

fn parse_response(stdout: &[u8]) -> Result<SandboxResponse, SandboxError> {
    let text = String::from_utf8_lossy(stdout);
    let line = text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
    serde_json::from_str(line).map_err(|e| SandboxError::Protocol(format!("bad response {line:?}: {e}")))
}

/// Decodes one priority: a number, a string, an array of numbers and
/// strings, or `{"inf": 1}` / `{"inf": -1}` / `{"nan": true}` for the
/// values JSON cannot spell.
pub fn decode_priority(v: &Value) -> Result<PriorityValue, SandboxError> {
    match v {
        Value::Array(items) => {
            let components = items.iter().map(decode_component).collect::<Result<Vec<_>, _>>()?;
            if components.is_empty() {
                return Err(SandboxError::Priority("empty tuple".into()));
            }
            Ok(PriorityValue::tuple(components))
        }
        Value::String(s) => Ok(PriorityValue::tuple(vec![Component::Text(s.clone())])),
        other => Ok(PriorityValue::Scalar(decode_number(other)?)),
    }
}

fn decode_component(v: &Value) -> Result<Component, SandboxError> {
    match v {
        Value::String(s) => Ok(Component::Text(s.clone())),
        other => Ok(Component::Num(decode_number(other)?)),
    }
}

fn decode_number(v: &Value) -> Result<f64, SandboxError> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| SandboxError::Priority(n.to_string())),
        Value::Bool(b) => Ok(if *b { 1.0 } else { 0.0 }),
        Value::Object(map) if map.len() == 1 => match (map.get("inf"), map.get("nan")) {
            (Some(sign), _) if sign.as_f64().is_some_and(|x| x < 0.0) => Ok(f64::NEG_INFINITY),
            (Some(_), _) => Ok(f64::INFINITY),
            (_, Some(_)) => Ok(f64::NAN),
            _ => Err(SandboxError::Priority(v.to_string())),
        },
        other => Err(SandboxError::Priority(other.to_string())),
    }
}

/// Encodes a priority the way [`decode_priority`] reads it.
pub fn encode_priority(p: &PriorityValue) -> Value {
    fn number(x: f64) -> Value {
        if x.is_nan() {
            serde_json::json!({ "nan": true })
        } else if x.is_infinite() {
            serde_json::json!({ "inf": if x > 0.0 { 1 } else { -1 } })
        } else {
            serde_json::json!(x)
        }
    }
    match p {
        PriorityValue::Scalar(x) => number(*x),
        PriorityValue::Tuple(c) => Value::Array(
            c.iter()
                .map(|c| match c {
                    Component::Num(x) => number(*x),
                    Component::Text(t) => Value::String(t.clone()),
                })
                .collect(),
        ),
    }
}

pub fn request_for(source: &str, graph_path: Option<&Path>, g: &dcc_core::ConfusabilityGraph) -> SandboxRequest {
    SandboxRequest {
        source: source.to_string(),
        graph_path: graph_path.map(Path::to_path_buf),
        n: g.n(),
        s: g.s(),
        vertices: (0..g.vertex_count()).map(|r| g.vertex(r).to_text()).collect(),
    }
}
