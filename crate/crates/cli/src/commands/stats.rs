//! `limgen stats`: corpus descriptive statistics as an aligned-column table
//! on stdout, with an optional machine-readable JSON report.

use std::path::PathBuf;

use clap::Args;

use limgen_core::corpus::{compute_stats, StatsBucket};
use limgen_core::report::{fixed, render_table};

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, write_json_pretty};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct StatsArgs {
    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Add one table row per venue
    #[arg(long)]
    per_venue: bool,

    /// Write the JSON report here; omit for a console-only run
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Tokenizer name; overrides the config value
    #[arg(long, value_name = "NAME")]
    tokenizer: Option<String>,
}

fn bucket_row(scope: &str, b: &StatsBucket) -> Vec<String> {
    vec![
        scope.to_string(),
        b.paper_count.to_string(),
        b.papers_with_limitations.to_string(),
        fixed(b.mean_paper_tokens, 2),
        fixed(b.mean_paper_sentences, 2),
        fixed(b.mean_limitation_tokens, 2),
        fixed(b.mean_limitation_sentences, 2),
    ]
}

pub fn run(mut ctx: RunContext, args: StatsArgs) -> anyhow::Result<()> {
    if let Some(tok) = args.tokenizer {
        ctx.config.tokenizer = tok;
    }
    ctx.config.validate()?;

    let corpus_path = corpus_file(&args.corpus);
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {},
    });
    let plan = ManifestPlan::new("stats", config).input("corpus", &corpus_path);
    if let Some(out) = &args.out {
        if plan.is_up_to_date(out) {
            print_skip(out);
            return Ok(());
        }
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let tok = ctx.tokenizer()?;
    let stats = compute_stats(&corpus, tok.as_ref());

    let headers = [
        "scope",
        "papers",
        "with-lims",
        "paper-tokens",
        "paper-sents",
        "lim-tokens",
        "lim-sents",
    ];
    let mut rows = vec![bucket_row("overall", &stats.overall)];
    if args.per_venue {
        for (venue, bucket) in &stats.per_venue {
            rows.push(bucket_row(venue, bucket));
        }
    }
    println!("{}", render_table(&headers, &rows));

    if let Some(out) = &args.out {
        ensure_parent_dir(out)?;
        write_json_pretty(out, &stats)?;
        plan.write(&[("stats", out)], out)?;
        println!("report -> {}", out.display());
    }
    Ok(())
}
