use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use dcc::evaluator::{Evaluator, DEFAULT_TIMEOUT};
use dcc::graphs::GraphCache;
use dcc::llm::{LlmClient, LlmError, MockClient, RetryPolicy};
use dcc::orchestrator::{apply_result, run_search, Checkpoint, CheckpointPolicy, Halt, SearchError, SearchRun};
use dcc::transport::{InProcess, QueueName, ResultMsg, Transport, TransportError};
use dcc_core::prompt::LlmParams;
use dcc_core::{Builtin, EvalInput, EvalResult, EvalStatus, ScoreSpec, SearchConfig};

fn evaluator() -> Evaluator {
    Evaluator::new(Arc::new(GraphCache::in_memory()), EvalInput::single(), ScoreSpec::Largest, DEFAULT_TIMEOUT)
}

fn config(budget: u64, post_optimal: u64) -> SearchConfig {
    SearchConfig { budget, post_optimal_budget: post_optimal, ..SearchConfig::default() }
}

fn script(items: &[&str]) -> MockClient {
    MockClient::new(items.iter().map(|s| s.to_string()).collect())
}

fn run_with(
    cp: Checkpoint,
    e: &Evaluator,
    client: &dyn LlmClient,
    transport: &mut dyn Transport,
    stop_after: Option<u64>,
) -> Result<(Halt, Checkpoint), SearchError> {
    let mut run = SearchRun::new(e, client, transport);
    run.retry = RetryPolicy { max_attempts: 2, base_delay_ms: 1, max_delay_ms: 1 };
    run.stop_after = stop_after;
    run_search(cp, &mut run)
}

fn full_run(config: SearchConfig, seed: u64, client: &dyn LlmClient) -> Checkpoint {
    let e = evaluator();
    let cp = Checkpoint::start(config, seed, &e).unwrap();
    run_with(cp, &e, client, &mut InProcess::new(), None).unwrap().1
}

/// Completions covering several signatures, so storage depends on which
/// island each prompt was drawn from.
fn mixed_script() -> Vec<String> {
    let bodies = [
        Builtin::MinDegree.source(),
        "    return 0\n",
        Builtin::SlidingWindow.source(),
        "not code",
        Builtin::NumberTheoretic.source(),
        Builtin::GraphBased.source(),
        Builtin::VtEquivalent.source(),
        Builtin::VtIndicator.source(),
    ];
    (0..40).map(|i| bodies[(i * 5 + i / 8) % bodies.len()].to_string()).collect()
}

fn mixed_config() -> SearchConfig {
    SearchConfig { num_islands: 4, reset_every: 3, budget: 40, post_optimal_budget: 1000, ..SearchConfig::default() }
}

#[test]
fn scripted_run_reaches_the_optimum_and_stops() {
    let items = ["definitely not python", "return 0.0", Builtin::VtEquivalent.source()];
    let cp = full_run(config(1000, 20), 7, &script(&items));
    let s = &cp.run_state;
    assert_eq!(s.best_score, 172.0);
    assert_eq!(s.optimal_found_at, Some(3));
    assert_eq!(s.processed, 23);
    assert_eq!((s.stored, s.duplicates, s.non_executable, s.invalid_priority), (1, 1, 21, 0));
    assert_eq!(s.best_scores_log, [(0, 125.0), (3, 172.0)]);
    let again = full_run(config(1000, 20), 7, &script(&items));
    assert_eq!(again.to_json(), cp.to_json());
    assert_eq!(serde_json::to_string(&again.database).unwrap(), serde_json::to_string(&cp.database).unwrap());
}

#[test]
fn trivial_then_vt_equivalent() {
    let items = [Builtin::Trivial.source(), Builtin::VtEquivalent.source()];
    let cp = full_run(config(1000, 5), 1, &script(&items));
    assert_eq!(cp.run_state.optimal_found_at, Some(2));
    assert_eq!(cp.run_state.processed, 7);
    assert_eq!(cp.run_state.best_scores_log, [(0, 125.0), (2, 172.0)]);
}

#[test]
fn junk_only_run_uses_the_whole_budget() {
    let cp = full_run(config(30, 20), 3, &script(&["junk"; 30]));
    let s = &cp.run_state;
    assert_eq!((s.processed, s.stored, s.non_executable), (30, 0, 30));
    assert_eq!(s.best_score, 125.0);
    assert_eq!(s.optimal_found_at, None);
    assert_eq!(cp.database.counters().discarded, 30);
}

#[test]
fn budget_caps_processing_after_a_late_optimum() {
    let mut items = vec!["junk"; 9];
    items.push(Builtin::VtEquivalent.source());
    let cp = full_run(config(12, 20), 3, &script(&items));
    assert_eq!(cp.run_state.optimal_found_at, Some(10));
    assert_eq!(cp.run_state.processed, 12);
}

#[test]
fn seeds_change_the_trajectory() {
    let a = full_run(mixed_config(), 1, &MockClient::new(mixed_script()));
    let b = full_run(mixed_config(), 2, &MockClient::new(mixed_script()));
    assert!(a.database.counters().resets > 0);
    assert_ne!(a.to_json(), b.to_json());
    let s = &a.run_state;
    assert_eq!(s.processed, s.stored + s.duplicates + s.non_executable + s.invalid_priority);
    for island in a.database.islands() {
        assert_eq!(island.n_j as usize, island.member_count());
    }
    assert!(s.best_scores_log.windows(2).all(|w| w[0].1 < w[1].1));
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let whole = full_run(mixed_config(), 5, &MockClient::new(mixed_script()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let e = evaluator();
    let first = MockClient::new(mixed_script());
    let cp = Checkpoint::start(mixed_config(), 5, &e).unwrap();
    let mut transport = InProcess::new();
    let mut run = SearchRun::new(&e, &first, &mut transport);
    run.stop_after = Some(17);
    run.checkpoint = Some(CheckpointPolicy { path: path.clone(), every: 4 });
    let (halt, _) = run_search(cp, &mut run).unwrap();
    assert_eq!(halt, Halt::StopAfter);

    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.run_state.processed, 17);
    let second = MockClient::new(mixed_script());
    second.skip(17);
    let (halt, resumed) = run_with(loaded, &e, &second, &mut InProcess::new(), None).unwrap();
    assert_eq!(halt, Halt::Budget);
    assert_eq!(resumed.to_json(), whole.to_json());
}

/// Fails fatally once, at the given call, without consuming the script.
struct FailsOnce {
    inner: MockClient,
    calls: AtomicUsize,
    at: usize,
    error: LlmError,
}

impl LlmClient for FailsOnce {
    fn generate(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) == self.at {
            return Err(self.error.clone());
        }
        self.inner.generate(prompt, params)
    }
}

#[test]
fn fatal_client_error_checkpoints_and_resumes() {
    let whole = full_run(mixed_config(), 9, &MockClient::new(mixed_script()));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("abort.json");
    let e = evaluator();
    let failing = FailsOnce {
        inner: MockClient::new(mixed_script()),
        calls: AtomicUsize::new(0),
        at: 11,
        error: LlmError::Fatal("bad request".into()),
    };
    let cp = Checkpoint::start(mixed_config(), 9, &e).unwrap();
    let mut transport = InProcess::new();
    let mut run = SearchRun::new(&e, &failing, &mut transport);
    run.checkpoint = Some(CheckpointPolicy { path: path.clone(), every: 1000 });
    match run_search(cp, &mut run) {
        Err(SearchError::Llm { processed, checkpoint, source }) => {
            assert_eq!(processed, 11);
            assert_eq!(checkpoint.as_deref(), Some(path.as_path()));
            assert!(!source.is_retryable());
        }
        other => panic!("{:?}", other.map(|(h, _)| h)),
    }
    assert_eq!(transport.unacked(), 0);
    assert_eq!(QueueName::ALL.map(|q| transport.len(q)), [0, 0, 0]);

    let loaded = Checkpoint::load(&path).unwrap();
    let client = MockClient::new(mixed_script());
    client.skip(loaded.run_state.processed as usize);
    let (_, resumed) = run_with(loaded, &e, &client, &mut InProcess::new(), None).unwrap();
    assert_eq!(resumed.to_json(), whole.to_json());
}

#[test]
fn retryable_errors_do_not_touch_the_database() {
    let whole = full_run(mixed_config(), 4, &MockClient::new(mixed_script()));
    let flaky = FailsOnce {
        inner: MockClient::new(mixed_script()),
        calls: AtomicUsize::new(0),
        at: 6,
        error: LlmError::Retryable("connection refused".into()),
    };
    let e = evaluator();
    let cp = Checkpoint::start(mixed_config(), 4, &e).unwrap();
    let (_, done) = run_with(cp, &e, &flaky, &mut InProcess::new(), None).unwrap();
    assert_eq!(done.to_json(), whole.to_json());
}

/// Delivers every result message twice.
struct Redelivering(InProcess);

impl Transport for Redelivering {
    fn publish(&mut self, queue: QueueName, body: &[u8]) -> Result<(), TransportError> {
        self.0.publish(queue, body)?;
        if queue == QueueName::Results {
            self.0.publish(queue, body)?;
        }
        Ok(())
    }

    fn fetch(&mut self, queue: QueueName, wait: Duration) -> Result<Option<dcc::transport::Envelope>, TransportError> {
        self.0.fetch(queue, wait)
    }

    fn ack(&mut self, tag: u64) -> Result<(), TransportError> {
        self.0.ack(tag)
    }
}

#[test]
fn redelivered_results_are_ignored() {
    let whole = full_run(mixed_config(), 6, &MockClient::new(mixed_script()));
    let e = evaluator();
    let cp = Checkpoint::start(mixed_config(), 6, &e).unwrap();
    let mut transport = Redelivering(InProcess::new());
    let (_, dup) = run_with(cp, &e, &MockClient::new(mixed_script()), &mut transport, None).unwrap();
    assert_eq!(dup.to_json(), whole.to_json());
}

#[test]
fn duplicate_result_message_applies_once() {
    let e = evaluator();
    let mut cp = Checkpoint::start(config(100, 10), 1, &e).unwrap();
    let msg = ResultMsg {
        candidate_id: "c1".into(),
        island_id: 0,
        eval_result: e.evaluate_builtin(Builtin::VtEquivalent).unwrap(),
        source: Builtin::VtEquivalent.source().into(),
    };
    assert!(apply_result(&mut cp, msg.clone(), true).unwrap());
    let after_first = cp.to_json();
    assert!(!apply_result(&mut cp, msg, true).unwrap());
    assert_eq!(cp.to_json(), after_first);
    assert_eq!(cp.run_state.processed, 1);
    assert_eq!(cp.database.island(0).unwrap().n_j, 2);

    let failed = ResultMsg {
        candidate_id: "c2".into(),
        island_id: 1,
        eval_result: EvalResult::failed(EvalStatus::Timeout, 300_000),
        source: "    while True: pass\n".into(),
    };
    apply_result(&mut cp, failed, true).unwrap();
    assert_eq!(cp.run_state.non_executable, 1);
}

#[test]
fn checkpoint_files_are_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.json");
    let cp = Checkpoint::start(config(10, 1), 1, &evaluator()).unwrap();
    cp.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), cp);
    let text = std::fs::read_to_string(&path).unwrap().replacen("\"version\": 1", "\"version\": 9", 1);
    std::fs::write(&path, text).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

/// Needs a live broker; set `DCC_TEST_AMQP_URL` to run it.
#[test]
fn amqp_transport_matches_in_process() {
    let Ok(url) = std::env::var("DCC_TEST_AMQP_URL") else {
        eprintln!("DCC_TEST_AMQP_URL not set; skipping");
        return;
    };
    let whole = full_run(mixed_config(), 8, &MockClient::new(mixed_script()));
    let e = evaluator();
    let mut transport = dcc::transport::AmqpTransport::connect(&url, "dcc-test", true).unwrap();
    let cp = Checkpoint::start(mixed_config(), 8, &e).unwrap();
    let (_, over_broker) = run_with(cp, &e, &MockClient::new(mixed_script()), &mut transport, None).unwrap();
    assert_eq!(over_broker.to_json(), whole.to_json());
}
