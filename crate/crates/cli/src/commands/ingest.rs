//! `limgen ingest`: load a raw paper dump, validate and normalize it, and
//! write the corpus directory (papers.jsonl plus the ingest report).

use std::path::PathBuf;

use clap::Args;

use limgen_core::corpus::{load_corpus, save_corpus, InputSchema};
use limgen_core::Error;

use crate::context::RunContext;
use crate::files::write_json_pretty;
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct IngestArgs {
    /// Raw paper dump: one JSON record per line
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Corpus directory to create or refresh
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Input schema name
    #[arg(long, value_name = "NAME", default_value = "jsonl-v1")]
    schema: String,
}

pub fn run(ctx: RunContext, args: IngestArgs) -> anyhow::Result<()> {
    let schema = InputSchema::from_name(&args.schema)?;
    let corpus_path = args.out.join("papers.jsonl");
    let report_path = args.out.join("ingest_report.json");

    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": { "schema": args.schema },
    });
    let plan = ManifestPlan::new("ingest", config).input("input", &args.input);
    if plan.is_up_to_date(&corpus_path) {
        print_skip(&corpus_path);
        return Ok(());
    }

    let (corpus, report) = load_corpus(&args.input, schema)?;
    for row in &report.malformed {
        eprintln!(
            "warning: {}:{}: skipped record: {}",
            args.input.display(),
            row.line,
            row.reason
        );
    }

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_corpus(&corpus, &corpus_path)?;
    write_json_pretty(&report_path, &report)?;
    plan.write(
        &[("corpus", &corpus_path), ("report", &report_path)],
        &corpus_path,
    )?;

    println!(
        "ingested {} papers ({} without limitations, {} malformed rows skipped) -> {}",
        corpus.len(),
        report.missing_limitations,
        report.skipped(),
        corpus_path.display()
    );
    Ok(())
}
