//! `limgen`: batch pipeline for building limitation-generation datasets,
//! running generation against an LLM endpoint (or a scripted mock), and
//! scoring the results against reference limitation sections.
//!
//! Exit codes: 0 on success, 2 for command-line usage errors (clap), 1 for
//! everything else (bad data, missing files, endpoint failures).

mod commands;
mod context;
mod files;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::context::RunContext;

#[derive(Parser)]
#[command(
    name = "limgen",
    version,
    about = "Build, run, and score limitation-generation pipelines over parsed research papers"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct GlobalArgs {
    /// Pipeline configuration file (TOML); command flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker cap for fan-out stages; overrides the config value
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Chatty progress logging
    #[arg(long, short = 'v', global = true)]
    pub verbose: bool,

    /// Serve completions from a replies file (one JSON string per line,
    /// consumed in request order) instead of an LLM endpoint
    #[arg(long, global = true, value_name = "FILE")]
    pub mock: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a raw paper dump into a corpus directory
    Ingest(commands::ingest::IngestArgs),
    /// Print corpus statistics; optionally write the JSON report
    Stats(commands::stats::StatsArgs),
    /// Write a deterministic train/valid/test split of the corpus
    Split(commands::split::SplitArgs),
    /// Pack paper source text into token-budgeted passages
    Chunk(commands::chunk::ChunkArgs),
    /// Build retrieval records pairing limitation sentences with passages
    BuildDpr(commands::build_dpr::BuildDprArgs),
    /// Generate and cache one summary per paper
    Summarize(commands::summarize::SummarizeArgs),
    /// Generate limitation candidates for every paper
    Generate(commands::generate::GenerateArgs),
    /// Score generated limitations against the reference blocks
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Work with human rating records
    #[command(subcommand)]
    HumanEval(commands::human_eval::HumanEvalCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbose);
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let ctx = RunContext::new(&cli.global)?;
    match cli.command {
        Command::Ingest(args) => commands::ingest::run(ctx, args),
        Command::Stats(args) => commands::stats::run(ctx, args),
        Command::Split(args) => commands::split::run(ctx, args),
        Command::Chunk(args) => commands::chunk::run(ctx, args),
        Command::BuildDpr(args) => commands::build_dpr::run(ctx, args),
        Command::Summarize(args) => commands::summarize::run(ctx, args),
        Command::Generate(args) => commands::generate::run(ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(ctx, args),
        Command::HumanEval(cmd) => commands::human_eval::run(ctx, cmd),
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .init();
}
