//! `limgen build-dpr`: pair every reference limitation sentence with its
//! best-scoring passages and write the retrieval records.

use std::path::PathBuf;

use clap::Args;

use limgen_core::chunker::load_passages;
use limgen_core::retrieval::build_dpr_dataset;

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, load_summaries, write_jsonl};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct BuildDprArgs {
    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Chunked passages file
    #[arg(long, value_name = "FILE")]
    passages: PathBuf,

    /// Similarity floor below which passages are dropped; overrides config
    #[arg(long, value_name = "FLOAT")]
    threshold: Option<f64>,

    /// Passages kept per limitation sentence; overrides config
    #[arg(long, value_name = "INT")]
    top_k: Option<usize>,

    /// Summaries file whose entries are attached to the records
    #[arg(long, value_name = "FILE")]
    with_summary: Option<PathBuf>,

    /// Records file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(mut ctx: RunContext, args: BuildDprArgs) -> anyhow::Result<()> {
    if let Some(threshold) = args.threshold {
        ctx.config.threshold = threshold;
    }
    if let Some(top_k) = args.top_k {
        ctx.config.top_k = top_k;
    }
    ctx.config.validate()?;

    let corpus_path = corpus_file(&args.corpus);
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {},
    });
    let plan = ManifestPlan::new("build-dpr", config)
        .input("corpus", &corpus_path)
        .input("passages", &args.passages)
        .maybe_input("summaries", args.with_summary.as_ref());
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let passages = load_passages(&args.passages)?;
    let summaries = match &args.with_summary {
        Some(path) => Some(load_summaries(path)?),
        None => None,
    };
    let embedder = ctx.embedding_client()?;

    let build = build_dpr_dataset(
        &corpus,
        &passages,
        embedder.as_ref(),
        ctx.config.threshold,
        ctx.config.top_k,
        summaries.as_ref(),
    )?;
    for (paper_id, reason) in &build.skipped {
        eprintln!("warning: paper `{paper_id}` skipped: {reason}");
    }

    ensure_parent_dir(&args.out)?;
    write_jsonl(&args.out, &build.records)?;
    plan.write(&[("records", &args.out)], &args.out)?;

    let papers: std::collections::BTreeSet<&str> = build
        .records
        .iter()
        .map(|r| r.paper_id.as_str())
        .collect();
    println!(
        "built {} retrieval records across {} papers ({} skipped) -> {}",
        build.records.len(),
        papers.len(),
        build.skipped.len(),
        args.out.display()
    );
    Ok(())
}
