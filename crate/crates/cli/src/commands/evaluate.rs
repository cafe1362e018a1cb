//! `limgen evaluate`: score a generation run against the corpus's reference
//! limitation blocks and write a JSON report.

use std::path::PathBuf;

use clap::Args;

use limgen_core::eval::{evaluate_run, JudgeConfig, MetricSet};
use limgen_core::generation::{load_generation_records, PromptTemplate, TemplateRole};
use limgen_core::manifest::sha256_hex;
use limgen_core::Error;

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, load_summaries, write_json_pretty};
use crate::runs::{print_skip, ManifestPlan};

/// Word cap on the head-of-paper context handed to the judge when a paper
/// has no summary.
const JUDGE_CONTEXT_WORDS: usize = 256;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Generation records file to score
    #[arg(long, value_name = "FILE")]
    generated: PathBuf,

    /// Corpus directory (or papers file) holding the references
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Comma-separated metrics: rouge1, rouge2, rougeL, greedy, judge
    #[arg(long, value_name = "LIST")]
    metrics: String,

    /// File whose body overrides the built-in judge template
    #[arg(long, value_name = "FILE")]
    judge_prompt: Option<PathBuf>,

    /// Summaries file used as judge context
    #[arg(long, value_name = "FILE")]
    summaries: Option<PathBuf>,

    /// Report file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(ctx: RunContext, args: EvaluateArgs) -> anyhow::Result<()> {
    let metrics = MetricSet::parse(&args.metrics)?;
    let corpus_path = corpus_file(&args.corpus);

    let judge_template = if metrics.judge {
        Some(match &args.judge_prompt {
            Some(path) => {
                let body =
                    std::fs::read_to_string(path).map_err(|e| Error::io(path.clone(), e))?;
                PromptTemplate::for_role(TemplateRole::Judge, body)?
            }
            None => ctx.prompts(None)?.get(TemplateRole::Judge)?.clone(),
        })
    } else {
        None
    };

    let mut config_args = serde_json::Map::new();
    config_args.insert("metrics".to_string(), serde_json::json!(metrics.names()));
    if let Some(t) = &judge_template {
        config_args.insert(
            "judge_template_sha256".to_string(),
            serde_json::Value::String(sha256_hex(t.body.as_bytes())),
        );
        config_args.insert(
            "judge_context_words".to_string(),
            serde_json::json!(JUDGE_CONTEXT_WORDS),
        );
    }
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": config_args,
    });

    let plan = ManifestPlan::new("evaluate", config)
        .input("generated", &args.generated)
        .input("corpus", &corpus_path)
        .maybe_input("summaries", args.summaries.as_ref())
        .maybe_input("judge_prompt", args.judge_prompt.as_ref())
        .maybe_input("mock", ctx.mock.as_ref());
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let records = load_generation_records(&args.generated)?;
    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let summaries = match &args.summaries {
        Some(path) => Some(load_summaries(path)?),
        None => None,
    };
    let tok = ctx.tokenizer()?;
    let embedder = if metrics.greedy {
        Some(ctx.embedding_client()?)
    } else {
        None
    };

    let judge_client = if metrics.judge {
        Some(ctx.llm_client()?)
    } else {
        None
    };
    let params = ctx.params();
    let judge_cfg = judge_client.as_ref().map(|client| JudgeConfig {
        client: client.as_ref(),
        template: judge_template.as_ref().expect("template built with the client"),
        params: &params,
        summaries: summaries.as_ref(),
        context_words: JUDGE_CONTEXT_WORDS,
    });

    let report = evaluate_run(
        &records,
        &corpus,
        &metrics,
        embedder.as_deref(),
        judge_cfg.as_ref(),
        tok.as_ref(),
        ctx.jobs(),
    )?;
    for entry in &report.skipped {
        eprintln!("warning: paper `{}` skipped: {}", entry.paper_id, entry.reason);
    }

    ensure_parent_dir(&args.out)?;
    write_json_pretty(&args.out, &report)?;
    plan.write(&[("report", &args.out)], &args.out)?;

    let width = report.means.keys().map(String::len).max().unwrap_or(0);
    for (key, value) in &report.means {
        println!("{key:<width$}  {value:.4}");
    }
    let judge_note = if metrics.judge {
        format!(
            ", judge scored {}, {} unparsable",
            report.judge_scored, report.judge_parse_failures
        )
    } else {
        String::new()
    };
    println!(
        "evaluated {} papers ({} skipped{judge_note}) -> {}",
        report.evaluated,
        report.skipped.len(),
        args.out.display()
    );
    Ok(())
}
