use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use streamst_core::engine::Task;
use streamst_core::metrics::{BleuTokenize, EvalMode};
use streamst_core::types::ClockMode;
use streamst_core::PolicyKind;

mod commands;
mod output;

/// Remote auth token, read from the environment only.
pub const AUTH_TOKEN_ENV: &str = "STREAMST_AUTH_TOKEN";

#[derive(Parser)]
#[command(name = "streamst", version, about = "Streaming speech translation simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate policies over a fixture manifest and write traces and summaries.
    Run(RunArgs),
    /// Score a run directory and write a report and a latency-quality curve.
    Eval(EvalArgs),
    /// Build chain-of-thought training records from a manifest.
    BuildCot(BuildCotArgs),
    /// Serve the translation wire protocol from fixtures.
    StubServer(StubArgs),
    /// Rebuild session state from a trace file.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Scripted,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    Streamuni,
    #[value(name = "wait_k", alias = "wait-k")]
    WaitK,
}

impl From<PolicyChoice> for PolicyKind {
    fn from(p: PolicyChoice) -> Self {
        match p {
            PolicyChoice::Streamuni => PolicyKind::StreamUni,
            PolicyChoice::WaitK => PolicyKind::WaitK,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskChoice {
    Simulst,
    Streamst,
}

impl From<TaskChoice> for Task {
    fn from(t: TaskChoice) -> Self {
        match t {
            TaskChoice::Simulst => Task::Simulst,
            TaskChoice::Streamst => Task::Streamst,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockChoice {
    Ideal,
    Wall,
}

impl From<ClockChoice> for ClockMode {
    fn from(c: ClockChoice) -> Self {
        match c {
            ClockChoice::Ideal => ClockMode::Ideal,
            ClockChoice::Wall => ClockMode::WallClock,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Sentence,
    Stream,
}

impl From<ModeChoice> for EvalMode {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::Sentence => EvalMode::Sentence,
            ModeChoice::Stream => EvalMode::Stream,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TokenizeChoice {
    #[value(name = "13a", alias = "whitespace")]
    WhitespacePunct,
    #[value(alias = "zh")]
    Char,
}

impl From<TokenizeChoice> for BleuTokenize {
    fn from(t: TokenizeChoice) -> Self {
        match t {
            TokenizeChoice::WhitespacePunct => BleuTokenize::WhitespacePunct,
            TokenizeChoice::Char => BleuTokenize::Char,
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// Fixture manifest, one path per line.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "scripted")]
    pub backend: BackendChoice,
    /// Service base URL for the remote backend.
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long, value_enum, default_value = "streamuni")]
    pub policy: PolicyChoice,
    /// Lag values, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 3, 5, 7, 9])]
    pub k: Vec<u32>,
    /// Chunk size; defaults to each fixture's own.
    #[arg(long)]
    pub chunk_ms: Option<u32>,
    #[arg(long, value_enum, default_value = "simulst")]
    pub task: TaskChoice,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel fixtures; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "ideal")]
    pub clock: ClockChoice,
    /// Remote request timeout.
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Used for fixtures that do not name a target language.
    #[arg(long, default_value = "German")]
    pub target_lang: String,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Output directory of `run`.
    #[arg(long)]
    pub runs: PathBuf,
    /// Manifest holding the references.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "sentence")]
    pub mode: ModeChoice,
    #[arg(long, value_enum, default_value = "13a")]
    pub tokenize: TokenizeChoice,
    /// Report JSON; defaults to `<runs>/report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Curve CSV; defaults to `<runs>/curve.csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildCotArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Share of audio time emitted as streaming records.
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub target_lang: Option<String>,
}

#[derive(Args)]
pub struct StubArgs {
    /// Fixture manifest to serve.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port; the bound address is printed on stdout.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
    #[arg(long)]
    pub delay_on_tick: Option<u32>,
    #[arg(long)]
    pub fail_on_tick: Option<u32>,
    #[arg(long)]
    pub retract_on_tick: Option<u32>,
}

#[derive(Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub chunk_ms: u32,
    #[arg(long, value_enum, default_value = "streamuni")]
    pub policy: PolicyChoice,
}

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Some work items failed; the rest completed.
    Partial(String),
    /// Bad flags, unreadable inputs or invalid data; nothing useful was done.
    Config(String),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::BuildCot(args) => commands::build_cot(&args),
        Command::StubServer(args) => commands::stub_server(&args),
        Command::Replay(args) => commands::replay(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
