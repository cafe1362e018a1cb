//! `limgen generate`: produce candidate limitations for every paper in one
//! of four modes. A paper whose generation fails is written as a record with
//! no items and the failure message, so one bad paper never sinks a run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use limgen_core::chunker::{load_passages, Passage};
use limgen_core::generation::{
    run_chain_continuous, run_chain_stage1, run_chain_stage2, run_dpr, run_full, summarize,
    ChainRunConfig, FailureRecord, GeneratedItem, GenerationMode, GenerationRecord, SummaryCache,
    TemplateRole,
};
use limgen_core::manifest::sha256_hex;
use limgen_core::Error;

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, load_summaries, write_jsonl};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct GenerateArgs {
    /// Generation mode
    #[arg(long, value_parser = ["full", "dpr", "chain", "chain-continuous"])]
    mode: String,

    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Chunked passages file; required by every mode except `full`
    #[arg(long, value_name = "FILE", required_if_eq_any([
        ("mode", "dpr"),
        ("mode", "chain"),
        ("mode", "chain-continuous"),
    ]))]
    passages: Option<PathBuf>,

    /// Summaries file; optional context for `dpr`, and spares the chain
    /// modes from summarizing on the fly
    #[arg(long, value_name = "FILE")]
    summaries: Option<PathBuf>,

    /// Prompt template directory overriding the configured one
    #[arg(long, value_name = "DIR")]
    prompts: Option<PathBuf>,

    /// Generation records file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(ctx: RunContext, args: GenerateArgs) -> anyhow::Result<()> {
    let mode = GenerationMode::from_name(&args.mode)?;
    let corpus_path = corpus_file(&args.corpus);
    let prompts = ctx.prompts(args.prompts.as_deref())?;

    let chain_mode = matches!(
        mode,
        GenerationMode::Chain | GenerationMode::ChainContinuous
    );
    let compute_summaries = chain_mode && args.summaries.is_none();

    // Fingerprint the templates this mode renders, so a prompt edit
    // invalidates a previous run's manifest.
    let mut roles = match mode {
        GenerationMode::Full => vec![TemplateRole::FullPaper],
        GenerationMode::Dpr => vec![TemplateRole::Dpr],
        GenerationMode::Chain => vec![TemplateRole::Dpr, TemplateRole::Refinement],
        GenerationMode::ChainContinuous => vec![TemplateRole::Continuous],
    };
    if compute_summaries {
        roles.push(TemplateRole::Summary);
    }
    let mut template_hashes = serde_json::Map::new();
    for role in &roles {
        let t = prompts.get(*role)?;
        template_hashes.insert(
            role.name().to_string(),
            serde_json::Value::String(sha256_hex(t.body.as_bytes())),
        );
    }
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {
            "mode": mode.name(),
            "templates": template_hashes,
        },
    });

    let mut plan = ManifestPlan::new("generate", config)
        .input("corpus", &corpus_path)
        .maybe_input("passages", args.passages.as_ref())
        .maybe_input("summaries", args.summaries.as_ref())
        .maybe_input("mock", ctx.mock.as_ref());
    if let Some(seed) = ctx.config.llm.seed {
        plan = plan.seed("llm", seed);
    }
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let mut by_paper: BTreeMap<String, Vec<Passage>> = BTreeMap::new();
    if let Some(path) = &args.passages {
        for p in load_passages(path)? {
            by_paper.entry(p.paper_id.clone()).or_default().push(p);
        }
    }
    let file_summaries = match &args.summaries {
        Some(path) => Some(load_summaries(path)?),
        None => None,
    };

    let llm = ctx.llm_client()?;
    let tok = ctx.tokenizer()?;
    let params = ctx.params();
    let jobs = ctx.jobs();
    let limit = ctx.config.llm.max_input_tokens;

    let t_full = match mode {
        GenerationMode::Full => Some(prompts.get(TemplateRole::FullPaper)?),
        _ => None,
    };
    let t_passage = match mode {
        GenerationMode::Dpr | GenerationMode::Chain => Some(prompts.get(TemplateRole::Dpr)?),
        _ => None,
    };
    let t_refine = match mode {
        GenerationMode::Chain => Some(prompts.get(TemplateRole::Refinement)?),
        _ => None,
    };
    let t_continuous = match mode {
        GenerationMode::ChainContinuous => Some(prompts.get(TemplateRole::Continuous)?),
        _ => None,
    };
    let t_summary = if compute_summaries {
        Some(prompts.get(TemplateRole::Summary)?)
    } else {
        None
    };
    let embedder = match mode {
        GenerationMode::Chain => Some(ctx.embedding_client()?),
        _ => None,
    };
    let chain_cfg = ChainRunConfig {
        dedup_threshold: ctx.config.dedup_threshold,
        refine: true,
        stage1_params: params.clone(),
        stage2_params: params.clone(),
    };
    let summary_cache = SummaryCache::in_memory();
    let no_passages: Vec<Passage> = Vec::new();

    // The summary for a chain-mode paper: from the file when given,
    // otherwise one generation through the in-memory cache.
    let summary_for = |paper: &limgen_core::corpus::Paper| -> limgen_core::Result<String> {
        if let Some(map) = &file_summaries {
            return map.get(&paper.id).cloned().ok_or_else(|| {
                Error::Invalid(format!(
                    "paper `{}` has no entry in the summaries file",
                    paper.id
                ))
            });
        }
        let template = t_summary.expect("chain modes without --summaries load the summary template");
        Ok(summarize(
            llm.as_ref(),
            paper,
            template,
            &params,
            &summary_cache,
            tok.as_ref(),
            limit,
        )?
        .summary)
    };

    let mut records: Vec<GenerationRecord> = Vec::new();
    let mut failed_papers = 0usize;
    let mut truncated_papers = 0usize;
    for paper in corpus.papers() {
        let passages = by_paper
            .get(&paper.id)
            .map(Vec::as_slice)
            .unwrap_or(&no_passages);
        let outcome: limgen_core::Result<GenerationRecord> = (|| {
            match mode {
                GenerationMode::Full => {
                    let out = run_full(
                        llm.as_ref(),
                        paper,
                        t_full.expect("full mode loads its template"),
                        &params,
                        tok.as_ref(),
                        limit,
                    )?;
                    Ok(GenerationRecord {
                        paper_id: paper.id.clone(),
                        mode,
                        items: out.candidates.items,
                        failures: Vec::new(),
                        truncated: out.truncated,
                    })
                }
                GenerationMode::Dpr => {
                    let summary = file_summaries
                        .as_ref()
                        .and_then(|m| m.get(&paper.id))
                        .map(String::as_str);
                    let out = run_dpr(
                        llm.as_ref(),
                        &paper.id,
                        passages,
                        summary,
                        t_passage.expect("dpr mode loads its template"),
                        &params,
                        tok.as_ref(),
                        limit,
                        jobs,
                    )?;
                    Ok(GenerationRecord {
                        paper_id: paper.id.clone(),
                        mode,
                        items: out.candidates.items,
                        failures: out.failures,
                        truncated: out.truncated,
                    })
                }
                GenerationMode::Chain => {
                    let summary = summary_for(paper)?;
                    let s1 = run_chain_stage1(
                        llm.as_ref(),
                        &paper.id,
                        passages,
                        &summary,
                        t_passage.expect("chain mode loads the per-passage template"),
                        &chain_cfg.stage1_params,
                        tok.as_ref(),
                        limit,
                        jobs,
                    )?;
                    let s2 = run_chain_stage2(
                        llm.as_ref(),
                        embedder
                            .as_ref()
                            .expect("chain mode builds an embedder")
                            .as_ref(),
                        &s1.candidates,
                        t_refine.expect("chain mode loads the refinement template"),
                        &chain_cfg,
                        tok.as_ref(),
                        limit,
                    )?;
                    Ok(GenerationRecord {
                        paper_id: paper.id.clone(),
                        mode,
                        items: s2
                            .block
                            .sentences
                            .iter()
                            .map(|s| GeneratedItem {
                                text: s.clone(),
                                source_passage_index: None,
                            })
                            .collect(),
                        failures: s1.failures,
                        truncated: s1.truncated || s2.truncated,
                    })
                }
                GenerationMode::ChainContinuous => {
                    let summary = summary_for(paper)?;
                    let out = run_chain_continuous(
                        llm.as_ref(),
                        &paper.id,
                        passages,
                        &summary,
                        t_continuous.expect("continuous mode loads its template"),
                        &params,
                        tok.as_ref(),
                        limit,
                    )?;
                    Ok(GenerationRecord {
                        paper_id: paper.id.clone(),
                        mode,
                        items: out
                            .block
                            .sentences
                            .iter()
                            .map(|s| GeneratedItem {
                                text: s.clone(),
                                source_passage_index: None,
                            })
                            .collect(),
                        failures: Vec::new(),
                        truncated: out.truncated,
                    })
                }
            }
        })();
        match outcome {
            Ok(rec) => {
                for f in &rec.failures {
                    let at = f
                        .passage_index
                        .map(|i| format!(" (passage {i})"))
                        .unwrap_or_default();
                    eprintln!("warning: paper `{}`{at}: {}", paper.id, f.error);
                }
                truncated_papers += rec.truncated as usize;
                records.push(rec);
            }
            Err(e @ Error::MockExhausted { .. }) => return Err(e.into()),
            Err(e) => {
                failed_papers += 1;
                eprintln!("warning: paper `{}` failed: {e}", paper.id);
                records.push(GenerationRecord {
                    paper_id: paper.id.clone(),
                    mode,
                    items: Vec::new(),
                    failures: vec![FailureRecord {
                        passage_index: None,
                        error: e.to_string(),
                    }],
                    truncated: false,
                });
            }
        }
    }

    ensure_parent_dir(&args.out)?;
    write_jsonl(&args.out, &records)?;
    plan.write(&[("records", &args.out)], &args.out)?;

    println!(
        "generated limitations for {} papers in mode {} ({} failed, {} truncated) -> {}",
        records.len(),
        mode.name(),
        failed_papers,
        truncated_papers,
        args.out.display()
    );
    Ok(())
}
