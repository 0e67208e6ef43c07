//! `archopt`: command-line front end for hierarchical design-space analysis,
//! sampling, correction, optimization and benchmarking.

mod commands;
mod runs;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use archopt_core::format::parse_space;
use archopt_core::problems::{space_by_name, PROBLEM_NAMES};
use archopt_core::DesignSpace;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "archopt", version, about = "Hierarchical design-space analysis and optimization")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Random seed; all outputs are reproducible given the seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for evaluations and benchmark runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hierarchy statistics of a design space.
    Metrics(commands::MetricsArgs),
    /// Design of experiments.
    Sample(commands::SampleArgs),
    /// Correct a CSV of declared design vectors.
    Correct(commands::CorrectArgs),
    /// Run one optimization.
    Optimize(runs::OptimizeArgs),
    /// Run a benchmark matrix from a JSON configuration.
    Bench(runs::BenchArgs),
    /// Rank configurations from run files.
    Rank(runs::RankArgs),
    /// Write a design space in the JSON space format.
    ExportSpace(commands::ExportArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments; exit code 1.
    User(String),
    /// Failure inside the tool; exit code 2.
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Provenance stamped into every output.
#[derive(Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, seed: u64, config: serde_json::Value) -> Self {
        Meta { tool: "archopt", version: env!("CARGO_PKG_VERSION"), command, seed, config }
    }

    /// One-line comment header for CSV and text outputs.
    pub fn comment(&self) -> String {
        format!("# {}\n", serde_json::to_string(self).expect("metadata serializes"))
    }
}

/// Resolves a built-in space name or a path to a JSON space file.
pub fn load_space(arg: &str) -> CliResult<DesignSpace> {
    if let Some(space) = space_by_name(arg) {
        return Ok(space);
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(CliError::user(format!(
            "unknown space {arg:?}: not a file and not a built-in name ({}, table2, table4)",
            PROBLEM_NAMES.join(", ")
        )));
    }
    let text = read_text(path)?;
    parse_space(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))
}

/// Writes `content` to `path` through a temporary file and a rename, or to
/// stdout without a path.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::internal(e.to_string()))
        }
        Some(p) => write_atomic(p, content.as_bytes()),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = PathBuf::from(path);
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    tmp.set_file_name(name);
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::user("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Metrics(a) => commands::metrics(g, &a),
        Command::Sample(a) => commands::sample(g, &a),
        Command::Correct(a) => commands::correct(g, &a),
        Command::ExportSpace(a) => commands::export_space(g, &a),
        Command::Optimize(a) => runs::optimize(g, &a),
        Command::Bench(a) => runs::bench(g, &a),
        Command::Rank(a) => runs::rank(g, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::User(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(CliError::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
