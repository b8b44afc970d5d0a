//! `oblab`: benchmarks, privacy audits and trace dumps.
//!
//! Per-trial results are CSV, single reports are JSON. Exit status is 0 on
//! success, 2 for invalid arguments or input, 1 for anything else.

mod commands;
mod schema;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "oblab", version, about = "Differentially oblivious algorithms: benchmarks and auditor")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed; every trial draws from its own stream of it. The
    /// OBLAB_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent trials; output does not depend on it.
    #[arg(long, global = true, value_name = "K", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub parallel: u16,
    /// Write results here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Print the output schema of the subcommand and exit.
    #[arg(long, global = true)]
    pub schema: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dense-graph bipartiteness tester behind the noisy-threshold wrapper.
    /// CSV: trial, output, probes.
    TesterBench(TesterArgs),
    /// Predicate existence check. CSV: trial, output, probes, halted_at_checkpoint.
    LocateBench(LocateArgs),
    /// Noisy search on random sorted arrays. CSV: trial, correct, iterations, probes.
    SearchBench(SearchArgs),
    /// Sum of all records <= a in a JSON array file. JSON: index, sum, probes.
    Prefix(PrefixArgs),
    /// Query stream against one budget. CSV: query, answer, oracle, eps_spent, search_invoked, M, t.
    MultisearchBench(MultiArgs),
    /// Empirical epsilon of a mechanism on its canonical neighbor pair. JSON.
    Verify(VerifyArgs),
    /// Connectivity-tester attack on a permuted cycle. JSON.
    LowerboundDemo(LowerArgs),
    /// Access trace of a single run. CSV: step, kind, address.
    DumpTrace(DumpArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Bipartite,
    Complete,
    File,
}

#[derive(Args, Debug)]
pub struct TesterArgs {
    /// Vertices (ignored for --fixture file).
    #[arg(long, required_unless_present_any = ["schema", "file"])]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub beta: f64,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Fixture::Bipartite)]
    pub fixture: Fixture,
    /// Graph fixture JSON: {"n": .., "d": .., "edges": [[u, v], ...]}.
    #[arg(long, required_if_eq("fixture", "file"))]
    pub file: Option<PathBuf>,
    /// Vertices per base-tester run; defaults to the largest size the wrapper
    /// can afford, capped at the tester's nominal size.
    #[arg(long)]
    pub sample_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct LocateArgs {
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    /// Probability that a record matches.
    #[arg(long, required_unless_present = "schema")]
    pub p: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Truncate the noise so that every answer is correct.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug)]
pub struct PrefixArgs {
    /// JSON array of numbers in nondecreasing order.
    #[arg(long, required_unless_present = "schema")]
    pub file: Option<PathBuf>,
    #[arg(long, required_unless_present = "schema", allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub delta: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub beta: Option<f64>,
    /// Privacy of the search step; defaults to --epsilon.
    #[arg(long)]
    pub search_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MultiArgs {
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, required_unless_present = "schema")]
    pub beta: Option<f64>,
    /// `random`, or the path of a JSON array of query values.
    #[arg(long, default_value = "random")]
    pub queries: String,
    /// Number of random queries (sorted ascending).
    #[arg(long, default_value_t = 200)]
    pub count: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Locate,
    Search,
    Tester,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProjectionArg {
    Full,
    Addresses,
    Length,
    Intervals,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, required_unless_present = "schema")]
    pub target: Option<Target>,
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    /// Algorithm δ (locate, tester) and, unless --audit-delta is given, the
    /// auditor's δ-level is derived from it.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// δ subtracted in the estimator; defaults to δ(1+e^ε) for locate and
    /// tester and 0 for search.
    #[arg(long)]
    pub audit_delta: Option<f64>,
    /// Search failure probability.
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Defaults: length for locate, intervals for search, length plus the
    /// output bit for tester.
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionArg>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TesterKind {
    Naive,
    Fixed,
}

#[derive(Args, Debug)]
pub struct LowerArgs {
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub q: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = TesterKind::Naive)]
    pub tester: TesterKind,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[arg(long, value_enum, required_unless_present = "schema")]
    pub target: Option<Target>,
    #[arg(long, required_unless_present = "schema")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Match probability for locate.
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    /// Emit the projected trace as JSON instead of the raw CSV.
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionArg>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<oblab::Error> for CliError {
    fn from(e: oblab::Error) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn effective_seed(flag: u64) -> CliResult<u64> {
    match std::env::var("OBLAB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("OBLAB_SEED is not an unsigned integer: {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    // Results are buffered so that a failed run leaves no partial output file.
    let mut buf: Vec<u8> = Vec::new();
    if cli.common.schema {
        let s = schema::schema_for(&cli.command);
        writeln!(buf, "{}", serde_json::to_string_pretty(&s)?)?;
    } else {
        let seed = effective_seed(cli.common.seed)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.parallel as usize)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let ctx = commands::Context { seed, pool };
        match &cli.command {
            Command::TesterBench(a) => commands::tester_bench(&ctx, a, &mut buf)?,
            Command::LocateBench(a) => commands::locate_bench(&ctx, a, &mut buf)?,
            Command::SearchBench(a) => commands::search_bench(&ctx, a, &mut buf)?,
            Command::Prefix(a) => commands::prefix(&ctx, a, &mut buf)?,
            Command::MultisearchBench(a) => commands::multisearch_bench(&ctx, a, &mut buf)?,
            Command::Verify(a) => commands::verify(&ctx, a, &mut buf)?,
            Command::LowerboundDemo(a) => commands::lowerbound(&ctx, a, &mut buf)?,
            Command::DumpTrace(a) => commands::dump_trace(&ctx, a, &mut buf)?,
        }
    }
    match &cli.common.out {
        Some(path) => File::create(path)?.write_all(&buf)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&buf)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
