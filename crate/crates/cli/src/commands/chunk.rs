//! `limgen chunk`: pack every paper's generation source text into
//! token-budgeted passages and write them as a JSONL passages file.

use std::path::PathBuf;

use clap::Args;

use limgen_core::chunker::{pack_passages, save_passages, Passage};
use limgen_core::corpus::{build_source_text, default_drop_headings};

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct ChunkArgs {
    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Passage token budget; overrides the config value
    #[arg(long, value_name = "INT")]
    budget: Option<usize>,

    /// Tokenizer name; overrides the config value
    #[arg(long, value_name = "NAME")]
    tokenizer: Option<String>,

    /// Passages file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(mut ctx: RunContext, args: ChunkArgs) -> anyhow::Result<()> {
    if let Some(budget) = args.budget {
        ctx.config.budget = budget;
    }
    if let Some(tok) = args.tokenizer {
        ctx.config.tokenizer = tok;
    }
    ctx.config.validate()?;

    let corpus_path = corpus_file(&args.corpus);
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {},
    });
    let plan = ManifestPlan::new("chunk", config).input("corpus", &corpus_path);
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let tok = ctx.tokenizer()?;
    let drops = default_drop_headings();

    let mut passages: Vec<Passage> = Vec::new();
    let mut packed_papers = 0usize;
    let mut empty_papers = 0usize;
    for paper in corpus.papers() {
        let paragraphs = build_source_text(paper, &drops);
        if paragraphs.is_empty() {
            empty_papers += 1;
            eprintln!(
                "warning: paper `{}` has no source text after section filtering; skipped",
                paper.id
            );
            continue;
        }
        passages.extend(pack_passages(
            &paper.id,
            &paragraphs,
            ctx.config.budget,
            tok.as_ref(),
        )?);
        packed_papers += 1;
    }

    ensure_parent_dir(&args.out)?;
    save_passages(&args.out, &passages)?;
    plan.write(&[("passages", &args.out)], &args.out)?;

    println!(
        "packed {} passages from {} papers ({} without source text) at budget {} -> {}",
        passages.len(),
        packed_papers,
        empty_papers,
        ctx.config.budget,
        args.out.display()
    );
    Ok(())
}
