//! `limgen human-eval aggregate`: tally annotator rating rows into a
//! per-system table.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use limgen_core::eval::{aggregate_human_eval, load_human_eval_records};

use crate::context::RunContext;
use crate::files::{ensure_parent_dir, write_json_pretty};
use crate::runs::{print_skip, ManifestPlan};

#[derive(Subcommand)]
pub enum HumanEvalCommand {
    /// Aggregate rating rows into per-system counts and percentages
    Aggregate(AggregateArgs),
}

#[derive(Args)]
pub struct AggregateArgs {
    /// Rating rows file (JSONL)
    #[arg(long, value_name = "FILE")]
    records: PathBuf,

    /// Aggregate table file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn run(ctx: RunContext, cmd: HumanEvalCommand) -> anyhow::Result<()> {
    match cmd {
        HumanEvalCommand::Aggregate(args) => aggregate(ctx, args),
    }
}

fn aggregate(ctx: RunContext, args: AggregateArgs) -> anyhow::Result<()> {
    let config = serde_json::json!({
        "pipeline": ctx.config.snapshot(),
        "args": {},
    });
    let plan = ManifestPlan::new("human-eval aggregate", config).input("records", &args.records);
    if plan.is_up_to_date(&args.out) {
        print_skip(&args.out);
        return Ok(());
    }

    let (records, rejected) = load_human_eval_records(&args.records)?;
    for row in &rejected {
        eprintln!(
            "warning: {}:{}: row rejected: {}",
            args.records.display(),
            row.line,
            row.reason
        );
    }
    let table = aggregate_human_eval(&records);

    let report = serde_json::json!({
        "per_system": table.per_system,
        "total_records": table.total_records,
        "rejected": rejected,
    });
    ensure_parent_dir(&args.out)?;
    write_json_pretty(&args.out, &report)?;
    plan.write(&[("table", &args.out)], &args.out)?;

    let name_width = table
        .per_system
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("system".len());
    println!("{:<name_width$}  {:>7}  q1..q4 yes/partial/no (%)", "system", "records");
    for (system, agg) in &table.per_system {
        let cells: Vec<String> = agg
            .questions
            .iter()
            .map(|q| {
                format!(
                    "{:.0}/{:.0}/{:.0}",
                    q.pct_yes, q.pct_partial, q.pct_no
                )
            })
            .collect();
        println!(
            "{:<name_width$}  {:>7}  {}",
            system,
            agg.records,
            cells.join("  ")
        );
    }
    println!(
        "aggregated {} rating rows across {} systems ({} rejected) -> {}",
        table.total_records,
        table.per_system.len(),
        rejected.len(),
        args.out.display()
    );
    Ok(())
}
