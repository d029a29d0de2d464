//! The search loop: sample a prompt, generate, extract, evaluate, store.
//!
//! Every step passes through the transport's three queues, and the database
//! is only touched by the owner step. With one worker per role the loop is
//! sequential, so a fixed seed and a scripted client give a reproducible run.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dcc_core::progdb::{Database, Fnv1a, Member, RngState, StoreOutcome};
use dcc_core::prompt::{extract_body, render_prompt};
use dcc_core::scoring::is_optimal;
use dcc_core::{Builtin, EvalInput, EvalStatus, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::evaluator::{EvalError, Evaluator};
use crate::llm::{generate_with_retry, LlmClient, LlmError, RetryPolicy};
use crate::transport::{publish_json, CandidateMsg, PromptMsg, QueueName, ResultMsg, Transport, TransportError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub processed: u64,
    pub stored: u64,
    pub duplicates: u64,
    /// Includes timeouts.
    pub non_executable: u64,
    pub invalid_priority: u64,
    pub best_score: f64,
    /// `(processed, best_score)` at the start and at every improvement.
    pub best_scores_log: Vec<(u64, f64)>,
    pub optimal_found_at: Option<u64>,
}

impl RunState {
    fn record_best(&mut self, best: f64) {
        if self.best_scores_log.is_empty() || best > self.best_score {
            self.best_score = best;
            self.best_scores_log.push((self.processed, best));
        }
    }
}

/// Everything needed to continue a run: the run counters, the database and
/// the ids of candidates whose results were already applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub run_state: RunState,
    pub database: Database,
    pub handled: BTreeSet<String>,
}

impl Checkpoint {
    /// A fresh run: every island holds the trivial function.
    pub fn start(config: SearchConfig, seed: u64, evaluator: &Evaluator) -> Result<Self, SearchError> {
        let result = evaluator.evaluate_builtin(Builtin::Trivial)?;
        let hash = result.hash.ok_or(SearchError::Init(result.status))?;
        let init = Member::new("init".into(), Builtin::Trivial.source().into(), hash);
        let database = Database::new(config, seed, init, &result)?;
        let mut run_state = RunState::default();
        run_state.record_best(database.best_score().unwrap_or(f64::NEG_INFINITY));
        Ok(Self { version: CHECKPOINT_VERSION, run_state, database, handled: BTreeSet::new() })
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let text = fs::read_to_string(path).map_err(|e| SearchError::Io { path: path.to_path_buf(), source: e })?;
        let mut cp: Checkpoint =
            serde_json::from_str(&text).map_err(|e| SearchError::Checkpoint(format!("{}: {e}", path.display())))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(SearchError::Checkpoint(format!("unsupported checkpoint version {}", cp.version)));
        }
        cp.database = cp.database.check_loaded()?;
        Ok(cp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        let io = |e| SearchError::Io { path: path.to_path_buf(), source: e };
        let tmp = path.with_extension("partial");
        fs::write(&tmp, self.to_json()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("initial function failed to evaluate ({0})")]
    Init(EvalStatus),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Database(#[from] dcc_core::Error),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("language model failed after {processed} candidates: {source}")]
    Llm { source: LlmError, processed: u64, checkpoint: Option<PathBuf> },
    #[error("{0} queue is empty when a message was expected")]
    MissingMessage(QueueName),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Halt {
    Budget,
    PostOptimal,
    StopAfter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Save after this many processed candidates (and always at the end).
    pub every: u64,
}

/// Workers and options for one call of [`run_search`].
pub struct SearchRun<'a> {
    pub evaluator: &'a Evaluator,
    pub client: &'a dyn LlmClient,
    pub transport: &'a mut dyn Transport,
    pub retry: RetryPolicy,
    pub checkpoint: Option<CheckpointPolicy>,
    /// Pause once `processed` reaches this value.
    pub stop_after: Option<u64>,
    /// How long a worker waits for its input message.
    pub fetch_wait: Duration,
}

impl<'a> SearchRun<'a> {
    pub fn new(evaluator: &'a Evaluator, client: &'a dyn LlmClient, transport: &'a mut dyn Transport) -> Self {
        Self {
            evaluator,
            client,
            transport,
            retry: RetryPolicy::default(),
            checkpoint: None,
            stop_after: None,
            fetch_wait: Duration::from_secs(5),
        }
    }
}

/// Whether the run is over, and why.
pub fn halt_reason(state: &RunState, config: &SearchConfig, stop_after: Option<u64>) -> Option<Halt> {
    if state.processed >= config.budget {
        return Some(Halt::Budget);
    }
    if let Some(k) = state.optimal_found_at {
        if state.processed >= k + config.post_optimal_budget {
            return Some(Halt::PostOptimal);
        }
    }
    if stop_after.is_some_and(|n| state.processed >= n) {
        return Some(Halt::StopAfter);
    }
    None
}

/// FNV-1a of the prompt id, the completion and the sequence number.
pub fn candidate_id(prompt_id: &str, completion: &str, seq: u64) -> String {
    use std::fmt::Write;
    let mut h = Fnv1a::default();
    let _ = write!(h, "{prompt_id}\u{0}{completion}\u{0}{seq}");
    format!("c{:016x}", h.finish())
}

pub fn run_search(mut cp: Checkpoint, run: &mut SearchRun<'_>) -> Result<(Halt, Checkpoint), SearchError> {
    let config = cp.database.config().clone();
    let optimal_known = config.inputs == EvalInput::single();
    let mut since_save = 0u64;
    loop {
        if let Some(halt) = halt_reason(&cp.run_state, &config, run.stop_after) {
            if let Some(policy) = &run.checkpoint {
                cp.save(&policy.path)?;
            }
            return Ok((halt, cp));
        }
        let seq = cp.run_state.processed;

        // sampler, on the database owner
        let rng_before = RngState::capture(cp.database.rng());
        let pair = cp.database.sample_prompt_pair()?;
        let n_j = cp.database.island(pair.island)?.n_j;
        let sources: Vec<&str> = pair.examples.iter().map(|e| e.source.as_str()).collect();
        let prompt = PromptMsg {
            prompt_id: format!("p{seq}"),
            island_id: pair.island,
            text: render_prompt(config.template, &sources, sources.len())?,
            llm_params: config.llm.for_island(n_j),
        };
        publish_json(run.transport, QueueName::Prompts, &prompt)?;

        // LLM worker
        let env = fetch(run, QueueName::Prompts)?;
        let prompt: PromptMsg = env.decode()?;
        let completion = match generate_with_retry(run.client, &prompt.text, &prompt.llm_params, &run.retry) {
            Ok(c) => c,
            Err(source) => {
                run.transport.ack(env.tag)?;
                *cp.database.rng() = rng_before.restore()?;
                let checkpoint = match &run.checkpoint {
                    Some(policy) => {
                        cp.save(&policy.path)?;
                        Some(policy.path.clone())
                    }
                    None => None,
                };
                return Err(SearchError::Llm { source, processed: seq, checkpoint });
            }
        };
        let candidate = CandidateMsg {
            candidate_id: candidate_id(&prompt.prompt_id, &completion, seq),
            prompt_id: prompt.prompt_id,
            island_id: prompt.island_id,
            source: extract_body(&completion).unwrap_or_default(),
        };
        publish_json(run.transport, QueueName::Candidates, &candidate)?;
        run.transport.ack(env.tag)?;

        // evaluator worker
        let env = fetch(run, QueueName::Candidates)?;
        let candidate: CandidateMsg = env.decode()?;
        let eval_result = run.evaluator.evaluate_source(&candidate.source)?;
        let expected = candidate.candidate_id.clone();
        let result = ResultMsg {
            candidate_id: candidate.candidate_id,
            island_id: candidate.island_id,
            eval_result,
            source: candidate.source,
        };
        publish_json(run.transport, QueueName::Results, &result)?;
        run.transport.ack(env.tag)?;

        // database owner; stale redeliveries ahead of the current result are skipped
        loop {
            let env = fetch(run, QueueName::Results)?;
            let result: ResultMsg = env.decode()?;
            let current = result.candidate_id == expected;
            apply_result(&mut cp, result, optimal_known)?;
            run.transport.ack(env.tag)?;
            if current {
                break;
            }
        }

        if cp.database.reset_due() {
            cp.database.reset_islands();
        }
        since_save += 1;
        if let Some(policy) = &run.checkpoint {
            if since_save >= policy.every.max(1) {
                cp.save(&policy.path)?;
                since_save = 0;
            }
        }
    }
}

fn fetch(run: &mut SearchRun<'_>, queue: QueueName) -> Result<crate::transport::Envelope, SearchError> {
    run.transport.fetch(queue, run.fetch_wait)?.ok_or(SearchError::MissingMessage(queue))
}

/// Applies one result message. A candidate id seen before is ignored, so a
/// redelivered message changes nothing. Returns whether it was applied.
pub fn apply_result(cp: &mut Checkpoint, result: ResultMsg, optimal_known: bool) -> Result<bool, SearchError> {
    if !cp.handled.insert(result.candidate_id.clone()) {
        return Ok(false);
    }
    let r = &result.eval_result;
    let state = &mut cp.run_state;
    state.processed += 1;
    match r.status {
        EvalStatus::Ok => {
            let member = Member::new(result.candidate_id, result.source, r.hash.unwrap_or_default());
            match cp.database.store(result.island_id, member, r)? {
                StoreOutcome::Stored { .. } => state.stored += 1,
                StoreOutcome::Duplicate => state.duplicates += 1,
                StoreOutcome::Discarded => state.non_executable += 1,
            }
            if optimal_known && state.optimal_found_at.is_none() && is_optimal(r, &cp.database.config().inputs)? {
                state.optimal_found_at = Some(state.processed);
            }
        }
        EvalStatus::InvalidPriority => {
            cp.database.store(result.island_id, Member::new(result.candidate_id, result.source, 0), r)?;
            state.invalid_priority += 1;
        }
        EvalStatus::NonExecutable | EvalStatus::Timeout => {
            cp.database.store(result.island_id, Member::new(result.candidate_id, result.source, 0), r)?;
            state.non_executable += 1;
        }
    }
    if let Some(best) = cp.database.best_score() {
        state.record_best(best);
    }
    Ok(true)
}
