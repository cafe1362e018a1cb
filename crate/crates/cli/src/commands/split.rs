//! `limgen split`: seeded, deterministic train/valid/test partition of the
//! corpus paper ids.

use std::path::PathBuf;

use clap::Args;

use limgen_core::corpus::split_corpus;

use crate::context::RunContext;
use crate::files::{corpus_file, ensure_parent_dir, load_corpus_arg, write_json_pretty};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Args)]
pub struct SplitArgs {
    /// Corpus directory (or papers file)
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,

    /// Shuffle seed; overrides the config value
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Train,valid,test shares; overrides the config value
    #[arg(long, value_name = "R,R,R", value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,

    /// Output file; defaults to split.json next to the corpus file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_ratios(raw: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated ratios, got {}",
            parts.len()
        ));
    }
    let mut out = [0.0f64; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("ratio `{}`: {e}", part.trim()))?;
    }
    Ok(out)
}

pub fn run(mut ctx: RunContext, args: SplitArgs) -> anyhow::Result<()> {
    if let Some(seed) = args.seed {
        ctx.config.split.seed = seed;
    }
    if let Some(ratios) = args.ratios {
        ctx.config.split.ratios = ratios;
    }
    ctx.config.validate()?;
    let seed = ctx.config.split.seed;
    let ratios = ctx.config.split.ratios;

    let corpus_path = corpus_file(&args.corpus);
    let out = args
        .out
        .unwrap_or_else(|| corpus_path.with_file_name("split.json"));

    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {},
    });
    let plan = ManifestPlan::new("split", config)
        .input("corpus", &corpus_path)
        .seed("split", seed);
    if plan.is_up_to_date(&out) {
        print_skip(&out);
        return Ok(());
    }

    let (corpus, _) = load_corpus_arg(&args.corpus)?;
    let assignment = split_corpus(&corpus, ratios, seed)?;

    ensure_parent_dir(&out)?;
    write_json_pretty(&out, &assignment)?;
    plan.write(&[("split", &out)], &out)?;

    println!(
        "split {} papers (seed {}) -> train {}, valid {}, test {} -> {}",
        corpus.len(),
        seed,
        assignment.train.len(),
        assignment.valid.len(),
        assignment.test.len(),
        out.display()
    );
    Ok(())
}
