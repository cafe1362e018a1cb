//! `limgen summarize`: one short summary per paper, cached by source hash so
//! re-runs only pay for papers whose text changed.

use std::path::PathBuf;

use clap::Args;

use limgen_core::client::parallel_map;
use limgen_core::generation::{summarize, SummaryCache, TemplateRole};
use limgen_core::manifest::sha256_hex;
use limgen_core::Error;

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, write_jsonl, SummaryRecord};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct SummarizeArgs {
    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Prompt template directory overriding the configured one
    #[arg(long, value_name = "DIR")]
    prompts: Option<PathBuf>,

    /// Summaries file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    /// Cache file; defaults to `summary_cache.jsonl` next to --out
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
}

pub fn run(ctx: RunContext, args: SummarizeArgs) -> anyhow::Result<()> {
    let corpus_path = corpus_file(&args.corpus);
    let prompts = ctx.prompts(args.prompts.as_deref())?;
    let template = prompts.get(TemplateRole::Summary)?;

    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {
            "template_sha256": sha256_hex(template.body.as_bytes()),
        },
    });
    let plan = ManifestPlan::new("summarize", config)
        .input("corpus", &corpus_path)
        .maybe_input("mock", ctx.mock.as_ref());
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let client = ctx.llm_client()?;
    let tok = ctx.tokenizer()?;
    let params = ctx.params();
    let cache_path = args
        .cache
        .clone()
        .unwrap_or_else(|| args.out.with_file_name("summary_cache.jsonl"));
    ensure_parent_dir(&cache_path)?;
    let cache = SummaryCache::with_file(&cache_path)?;

    let papers: Vec<_> = corpus.papers().iter().collect();
    let outcomes = parallel_map(&papers, ctx.jobs(), |_, paper| {
        summarize(
            client.as_ref(),
            paper,
            template,
            &params,
            &cache,
            tok.as_ref(),
            ctx.config.llm.max_input_tokens,
        )
    });

    let mut rows = Vec::new();
    let mut hits = 0usize;
    let mut truncated = 0usize;
    let mut failures = 0usize;
    for (paper, outcome) in papers.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                hits += o.from_cache as usize;
                truncated += o.truncated as usize;
                rows.push(SummaryRecord {
                    paper_id: paper.id.clone(),
                    summary: o.summary,
                });
            }
            // A dry mock means the replies file no longer matches the run;
            // the remaining papers would all mis-summarize, so stop.
            Err(e @ Error::MockExhausted { .. }) => return Err(e.into()),
            Err(e) => {
                failures += 1;
                eprintln!("warning: paper `{}` not summarized: {e}", paper.id);
            }
        }
    }
    if rows.is_empty() {
        anyhow::bail!("no paper could be summarized ({failures} failures)");
    }

    ensure_parent_dir(&args.out)?;
    write_jsonl(&args.out, &rows)?;
    plan.write(&[("summaries", &args.out)], &args.out)?;

    println!(
        "summarized {} papers ({} from cache, {} truncated, {} failed) -> {}",
        rows.len(),
        hits,
        truncated,
        failures,
        args.out.display()
    );
    Ok(())
}
