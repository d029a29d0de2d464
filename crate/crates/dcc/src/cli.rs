//! Command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dcc_core::analysis::{merge_histograms, overlap, random_baseline, size_table};
use dcc_core::greedy::greedy_construct;
use dcc_core::vtcodes::{vt_code, VtParams};
use dcc_core::{build_graph, Builtin, Code};
use serde::Serialize;

use crate::config::RunConfig;
use crate::evaluator::Evaluator;
use crate::graphs::{write_graph, GraphCache};
use crate::io::{emit, read_code, write_code, Format};
use crate::llm::{HttpClient, LlmClient, MockClient, RetryPolicy};
use crate::orchestrator::{run_search, Checkpoint, CheckpointPolicy, RunState, SearchRun};
use crate::transport::{AmqpTransport, InProcess, Transport};

#[derive(Debug, Parser)]
#[command(name = "dcc", version, about = "Deletion-correcting code construction and priority-function search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greedy code from a built-in priority function
    Construct {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        priority: Builtin,
        /// Code file to write; stdout otherwise
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Code sizes for several priority functions over a range of lengths
    Table {
        #[arg(long, value_delimiter = ',', required = true)]
        priorities: Vec<Builtin>,
        #[arg(long)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Sequence overlap of two code files
    Overlap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Size histogram of greedy codes over random vertex orders
    Baseline {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to the available parallelism
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Confusability graph files
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// The Varshamov-Tenengolts code VT_a(n)
    Vt {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        a: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Priority-function search
    Search {
        #[command(subcommand)]
        command: SearchCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        out: PathBuf,
        /// Write the text edge list instead of the binary format
        #[arg(long)]
        text: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TransportMode {
    #[default]
    InProcess,
    Amqp,
}

#[derive(Debug, Subcommand)]
pub enum SearchCommand {
    Run(SearchArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TransportMode::InProcess)]
    pub transport: TransportMode,
    #[arg(long, required_if_eq("transport", "amqp"))]
    pub broker: Option<String>,
    /// Queue name prefix on the broker
    #[arg(long, default_value = "dcc")]
    pub queue_prefix: String,
    /// JSON array of completions replacing the configured endpoint
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Continue from a checkpoint file
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Pause after this many processed candidates
    #[arg(long)]
    pub stop_after: Option<u64>,
    /// Final database snapshot
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Trajectory output, written as `.csv` and `.json`
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write `<out>.csv` and `<out>.json` instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Output {
    fn emit<T: Serialize>(&self, rows: &[T]) -> anyhow::Result<()> {
        for path in emit(rows, self.format, self.out.as_deref())? {
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct OverlapRow {
    n: usize,
    size_a: usize,
    size_b: usize,
    common: usize,
    overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub size: usize,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    processed: u64,
    best_score: f64,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Construct { n, s, priority, out } => {
            let g = build_graph(n, s)?;
            let code = greedy_construct(&g, &priority)?;
            eprintln!("{priority} n={n} s={s}: {} codewords", code.len());
            output_code(&code, out.as_deref())
        }
        Command::Table { priorities, n_min, n_max, s, output } => {
            if n_min > n_max {
                bail!("--n-min {n_min} exceeds --n-max {n_max}");
            }
            output.emit(&size_table(&priorities, n_min..n_max + 1, s)?)
        }
        Command::Overlap { a, b, output } => {
            let (a, b) = (read_code(&a)?, read_code(&b)?);
            let value = overlap(&a, &b)?;
            let right = b.sorted();
            let common = a.codewords().iter().filter(|w| right.binary_search(w).is_ok()).count();
            output.emit(&[OverlapRow { n: a.n(), size_a: a.len(), size_b: b.len(), common, overlap: value }])
        }
        Command::Baseline { n, s, trials, seed, threads, output } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
            output.emit(&baseline(n, s, trials, seed, threads)?)
        }
        Command::Graph { command: GraphCommand::Build { n, s, out, text } } => {
            let g = build_graph(n, s)?;
            if text {
                std::fs::write(&out, g.to_edge_list_text()).with_context(|| format!("writing {}", out.display()))?;
            } else {
                write_graph(&out, &g)?;
            }
            eprintln!("({n}, {s}): {} vertices, {} edges -> {}", g.vertex_count(), g.edge_count(), out.display());
            Ok(())
        }
        Command::Vt { n, a, out } => {
            let code = vt_code(VtParams::new(n, a)?)?;
            output_code(&code, out.as_deref())
        }
        Command::Search { command: SearchCommand::Run(args) } => search(&args).map(drop),
    }
}

fn output_code(code: &Code, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => write_code(path, code),
        None => {
            print!("{}", code.to_text());
            Ok(())
        }
    }
}

/// Random-order histogram with the trial range split across threads.
pub fn baseline(n: usize, s: usize, trials: u64, seed: u64, threads: usize) -> anyhow::Result<Vec<HistogramRow>> {
    let g = build_graph(n, s)?;
    let threads = (threads.max(1) as u64).min(trials);
    let chunk = trials.div_ceil(threads);
    let mut hist = BTreeMap::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let g = &g;
                let range = (t * chunk).min(trials)..((t + 1) * chunk).min(trials);
                scope.spawn(move || random_baseline(g, seed, range))
            })
            .collect();
        for h in handles {
            merge_histograms(&mut hist, &h.join().expect("baseline worker panicked"));
        }
    });
    Ok(hist
        .into_iter()
        .map(|(size, count)| HistogramRow { size, count, frequency: count as f64 / trials as f64 })
        .collect())
}

/// Runs `search run`; returns the final run state.
pub fn search(args: &SearchArgs) -> anyhow::Result<RunState> {
    let config = RunConfig::load(&args.config)?;
    let graphs = Arc::new(match &config.graph_dir {
        Some(dir) => GraphCache::with_dir(dir).with_context(|| format!("creating {}", dir.display()))?,
        None => GraphCache::in_memory(),
    });
    let mut evaluator = Evaluator::new(
        graphs,
        config.search.inputs.clone(),
        config.search.score,
        Duration::from_secs(config.search.timeout_secs),
    );
    if let Some(sandbox) = &config.sandbox {
        evaluator = evaluator.with_sandbox(sandbox.clone());
    }
    evaluator.prewarm()?;

    let checkpoint = match &args.resume {
        Some(path) => {
            let cp = Checkpoint::load(path)?;
            if cp.database.config() != &config.search {
                bail!("{} was written with a different search configuration", path.display());
            }
            cp
        }
        None => Checkpoint::start(config.search.clone(), args.seed, &evaluator)?,
    };

    let (client, retry): (Box<dyn LlmClient>, RetryPolicy) = match (&args.mock, &config.endpoint) {
        (Some(path), _) => {
            let mock = MockClient::from_file(path)?;
            mock.skip(checkpoint.run_state.processed as usize);
            (Box::new(mock), RetryPolicy::none())
        }
        (None, Some(endpoint)) => (Box::new(HttpClient::new(endpoint.clone())), endpoint.retry),
        (None, None) => bail!("no [endpoint] in {} and no --mock script", args.config.display()),
    };
    let mut transport: Box<dyn Transport> = match args.transport {
        TransportMode::InProcess => Box::new(InProcess::new()),
        TransportMode::Amqp => {
            let url = args.broker.as_deref().context("--broker is required with --transport amqp")?;
            Box::new(AmqpTransport::connect(url, &args.queue_prefix, true)?)
        }
    };

    let mut run = SearchRun::new(&evaluator, client.as_ref(), transport.as_mut());
    run.retry = retry;
    run.stop_after = args.stop_after;
    run.checkpoint = config.checkpoint.as_ref().map(|c| CheckpointPolicy { path: c.path.clone(), every: c.every });
    let (halt, cp) = run_search(checkpoint, &mut run)?;

    let state = cp.run_state.clone();
    if let Some(path) = &args.snapshot {
        write_snapshot(path, &cp)?;
    }
    if let Some(path) = &args.trajectory {
        let rows: Vec<TrajectoryRow> =
            state.best_scores_log.iter().map(|&(processed, best_score)| TrajectoryRow { processed, best_score }).collect();
        emit(&rows, Format::Csv, Some(path))?;
    }
    let summary = serde_json::json!({ "halt": halt, "run_state": state });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(state)
}

fn write_snapshot(path: &Path, cp: &Checkpoint) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&cp.database)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
