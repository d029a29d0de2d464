//! Candidate evaluation: priorities on every input graph, greedy sizes,
//! validation, score and dedup hash, all under one wall-clock deadline.

use std::sync::atomic::AtomicBool;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use dcc_core::greedy::{compute_priorities, greedy_from_priorities, is_deletion_correcting, GreedyError};
use dcc_core::progdb::dedup_hash;
use dcc_core::{Builtin, EvalInput, EvalResult, EvalStatus, PriorityValue, ScoreSpec};

use crate::graphs::GraphCache;
use crate::sandbox::{request_for, SandboxCommand, SandboxError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// How a candidate body will be run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    Native(Builtin),
    External(String),
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("graph unavailable: {0}")]
    Graph(anyhow::Error),
    #[error("sandbox could not be started: {0}")]
    Sandbox(std::io::Error),
    #[error("code built at n={n}, s={s} is not deletion-correcting")]
    Validation { n: usize, s: usize },
    #[error("evaluation worker panicked")]
    Worker,
}

#[derive(Debug, Clone)]
struct Inner {
    graphs: Arc<GraphCache>,
    inputs: EvalInput,
    spec: ScoreSpec,
    timeout: Duration,
    sandbox: Option<SandboxCommand>,
}

/// Cheap to clone; clones share the graph cache.
#[derive(Debug, Clone)]
pub struct Evaluator {
    inner: Arc<Inner>,
}

enum Failure {
    Status(EvalStatus),
    Internal(EvalError),
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Internal(e)
    }
}

impl Evaluator {
    pub fn new(graphs: Arc<GraphCache>, inputs: EvalInput, spec: ScoreSpec, timeout: Duration) -> Self {
        Self { inner: Arc::new(Inner { graphs, inputs, spec, timeout, sandbox: None }) }
    }

    pub fn with_sandbox(self, sandbox: SandboxCommand) -> Self {
        let Inner { graphs, inputs, spec, timeout, .. } = Arc::unwrap_or_clone(self.inner);
        Self { inner: Arc::new(Inner { graphs, inputs, spec, timeout, sandbox: Some(sandbox) }) }
    }

    pub fn inputs(&self) -> &EvalInput {
        &self.inner.inputs
    }

    pub fn spec(&self) -> ScoreSpec {
        self.inner.spec
    }

    pub fn timeout(&self) -> Duration {
        self.inner.timeout
    }

    /// Builds (or loads) every input graph ahead of the first candidate.
    pub fn prewarm(&self) -> Result<(), EvalError> {
        for &(n, s) in self.inner.inputs.pairs() {
            self.inner.graphs.get(n, s).map_err(EvalError::Graph)?;
            if self.inner.sandbox.is_some() {
                self.inner.graphs.path(n, s).map_err(EvalError::Graph)?;
            }
        }
        Ok(())
    }

    /// Native built-ins are recognised by source; anything else needs the
    /// sandbox and is non-executable without one.
    pub fn resolve(&self, body: &str) -> Option<Candidate> {
        match Builtin::from_source(body) {
            Some(b) => Some(Candidate::Native(b)),
            None if self.inner.sandbox.is_some() => Some(Candidate::External(body.to_string())),
            None => None,
        }
    }

    pub fn evaluate_source(&self, body: &str) -> Result<EvalResult, EvalError> {
        match self.resolve(body) {
            Some(c) => self.evaluate(c),
            None => Ok(EvalResult::failed(EvalStatus::NonExecutable, 0)),
        }
    }

    pub fn evaluate_builtin(&self, b: Builtin) -> Result<EvalResult, EvalError> {
        self.evaluate(Candidate::Native(b))
    }

    pub fn evaluate(&self, candidate: Candidate) -> Result<EvalResult, EvalError> {
        let start = Instant::now();
        let deadline = start + self.inner.timeout;
        let cancel = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let inner = Arc::clone(&self.inner);
        let flag = Arc::clone(&cancel);
        thread::spawn(move || {
            let _ = tx.send(run(&inner, &candidate, deadline, &flag));
        });
        let outcome = match rx.recv_timeout(self.inner.timeout) {
            Ok(outcome) => outcome,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                cancel.store(true, std::sync::atomic::Ordering::Relaxed);
                Err(Failure::Status(EvalStatus::Timeout))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(Failure::Internal(EvalError::Worker)),
        };
        let elapsed_ms = start.elapsed().as_millis() as u64;
        match outcome {
            Ok((sizes, hash)) => Ok(EvalResult::ok(self.inner.spec, &self.inner.inputs, sizes, hash, elapsed_ms)
                .expect("one size per input pair")),
            Err(Failure::Status(status)) => Ok(EvalResult::failed(status, elapsed_ms)),
            Err(Failure::Internal(e)) => Err(e),
        }
    }
}

fn run(inner: &Inner, candidate: &Candidate, deadline: Instant, cancel: &AtomicBool) -> Result<(Vec<usize>, u64), Failure> {
    let mut sizes = Vec::with_capacity(inner.inputs.len());
    let mut vectors: Vec<Vec<PriorityValue>> = Vec::with_capacity(inner.inputs.len());
    for &(n, s) in inner.inputs.pairs() {
        let g = inner.graphs.get(n, s).map_err(EvalError::Graph)?;
        let priorities = match candidate {
            Candidate::Native(b) => compute_priorities(&g, b, Some(cancel)).map_err(greedy_status)?,
            Candidate::External(source) => {
                let sandbox = inner.sandbox.as_ref().ok_or(Failure::Status(EvalStatus::NonExecutable))?;
                let path = inner.graphs.path(n, s).map_err(EvalError::Graph)?;
                let request = request_for(source, path.as_deref(), &g);
                sandbox.run(&request, deadline, Some(cancel)).map_err(sandbox_status)?
            }
        };
        let code = greedy_from_priorities(&g, &priorities).map_err(greedy_status)?;
        if !is_deletion_correcting(&code) {
            return Err(EvalError::Validation { n, s }.into());
        }
        sizes.push(code.len());
        vectors.push(priorities);
    }
    Ok((sizes, dedup_hash(&vectors)))
}

fn greedy_status(e: GreedyError) -> Failure {
    Failure::Status(match e {
        GreedyError::Evaluation { .. } | GreedyError::Count { .. } => EvalStatus::NonExecutable,
        GreedyError::NonFinite(_) | GreedyError::Incomparable(..) => EvalStatus::InvalidPriority,
        GreedyError::Cancelled => EvalStatus::Timeout,
    })
}

fn sandbox_status(e: SandboxError) -> Failure {
    match e {
        SandboxError::Spawn(io) => Failure::Internal(EvalError::Sandbox(io)),
        SandboxError::Timeout | SandboxError::Cancelled => Failure::Status(EvalStatus::Timeout),
        SandboxError::Priority(_) => Failure::Status(EvalStatus::InvalidPriority),
        SandboxError::Candidate { .. } | SandboxError::Protocol(_) => Failure::Status(EvalStatus::NonExecutable),
    }
}
