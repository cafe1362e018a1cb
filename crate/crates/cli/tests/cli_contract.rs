//! Command-line contract: exit codes, flag/config precedence, manifest
//! resume behavior, input immutability, and tolerant-but-loud handling of
//! malformed rows.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

fn limgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limgen"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_code(out: &Output, want: i32, what: &str) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "{what}: expected exit {want}\nstdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out),
    );
}

/// Ingest the golden three-paper fixture into `root/corpus`, panicking on
/// failure; returns the corpus directory.
fn ingest_golden(root: &Path) -> PathBuf {
    let corpus = root.join("corpus");
    let out = limgen(&[
        "ingest",
        "--input",
        fixture("golden/papers_raw.jsonl").to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "ingest golden fixture");
    corpus
}

#[test]
fn usage_errors_exit_code_2() {
    let out = limgen(&["chunk", "--frobnicate"]);
    assert_code(&out, 2, "unknown flag");

    let out = limgen(&["generate", "--mode", "dpr", "--corpus", "x", "--out", "y"]);
    assert_code(&out, 2, "dpr mode without --passages");
    assert!(stderr(&out).contains("--passages"), "should name the missing flag");

    let out = limgen(&["generate", "--mode", "bogus", "--corpus", "x", "--out", "y"]);
    assert_code(&out, 2, "unknown generation mode");

    let out = limgen(&["split", "--corpus", "x", "--ratios", "0.5"]);
    assert_code(&out, 2, "ratio arity");
    assert!(stderr(&out).contains("three comma-separated ratios"));
}

#[test]
fn data_errors_exit_code_1() {
    let out = limgen(&[
        "evaluate",
        "--generated",
        "missing.jsonl",
        "--corpus",
        "missing",
        "--metrics",
        "rouge9",
        "--out",
        "report.json",
    ]);
    assert_code(&out, 1, "unknown metric");
    assert!(
        stderr(&out).contains("unknown metric `rouge9`"),
        "stderr should name the bad metric: {}",
        stderr(&out)
    );

    let tmp = tempfile::tempdir().unwrap();
    let out = limgen(&[
        "chunk",
        "--corpus",
        tmp.path().join("absent").to_str().unwrap(),
        "--out",
        tmp.path().join("p.jsonl").to_str().unwrap(),
    ]);
    assert_code(&out, 1, "missing corpus");
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn command_flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest_golden(tmp.path());
    let config = tmp.path().join("pipeline.toml");
    std::fs::write(&config, "budget = 64\n").unwrap();

    // Config alone applies its budget.
    let out = limgen(&[
        "chunk",
        "--config",
        config.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        tmp.path().join("from_config.jsonl").to_str().unwrap(),
    ]);
    assert_code(&out, 0, "chunk with config budget");
    assert!(
        stdout(&out).contains("at budget 64"),
        "config budget should apply: {}",
        stdout(&out)
    );

    // A flag on top of the same config wins.
    let out = limgen(&[
        "chunk",
        "--config",
        config.to_str().unwrap(),
        "--budget",
        "24",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        tmp.path().join("from_flag.jsonl").to_str().unwrap(),
    ]);
    assert_code(&out, 0, "chunk with flag override");
    assert!(
        stdout(&out).contains("at budget 24"),
        "flag should beat config: {}",
        stdout(&out)
    );
}

#[test]
fn unchanged_inputs_resume_with_a_skip() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest_golden(tmp.path());
    let passages = tmp.path().join("passages.jsonl");
    let chunk_args = [
        "chunk",
        "--corpus",
        corpus.to_str().unwrap(),
        "--budget",
        "32",
        "--out",
        passages.to_str().unwrap(),
    ];

    let first = limgen(&chunk_args);
    assert_code(&first, 0, "first chunk");
    assert!(stdout(&first).contains("packed"));

    let second = limgen(&chunk_args);
    assert_code(&second, 0, "second chunk");
    assert!(
        stdout(&second).contains("outputs match the run manifest; skipping"),
        "unchanged rerun should skip: {}",
        stdout(&second)
    );

    // Changing an input invalidates the manifest and the stage reruns.
    let papers = corpus.join("papers.jsonl");
    let mut rows = std::fs::read_to_string(&papers).unwrap();
    rows.push_str("{\"id\":\"paper-extra\",\"venue\":\"ACL\",\"year\":2025,\"sections\":[{\"heading\":\"Method\",\"text\":\"A new method paragraph.\"},{\"heading\":\"Limitations\",\"text\":\"It is new.\"}]}\n");
    std::fs::write(&papers, rows).unwrap();

    let third = limgen(&chunk_args);
    assert_code(&third, 0, "third chunk");
    assert!(
        stdout(&third).contains("packed"),
        "changed input must rerun the stage: {}",
        stdout(&third)
    );
}

#[test]
fn pipeline_never_mutates_its_input_files() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("inputs");
    std::fs::create_dir(&inputs).unwrap();
    for name in [
        "papers_raw.jsonl",
        "replies_summarize.jsonl",
        "replies_generate.jsonl",
        "replies_judge.jsonl",
    ] {
        std::fs::copy(fixture("golden").join(name), inputs.join(name)).unwrap();
    }
    let before: Vec<(String, Vec<u8>)> = {
        let mut entries: Vec<_> = std::fs::read_dir(&inputs)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        entries
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect()
    };

    let corpus = tmp.path().join("corpus");
    let run = tmp.path().join("run");
    let arg = |p: PathBuf| p.to_str().unwrap().to_string();
    for args in [
        vec![
            "ingest".to_string(),
            "--input".into(),
            arg(inputs.join("papers_raw.jsonl")),
            "--out".into(),
            arg(corpus.clone()),
        ],
        vec![
            "chunk".into(),
            "--corpus".into(),
            arg(corpus.clone()),
            "--budget".into(),
            "32".into(),
            "--out".into(),
            arg(run.join("passages.jsonl")),
        ],
        vec![
            "summarize".into(),
            "--corpus".into(),
            arg(corpus.clone()),
            "--mock".into(),
            arg(inputs.join("replies_summarize.jsonl")),
            "--out".into(),
            arg(run.join("summaries.jsonl")),
        ],
        vec![
            "generate".into(),
            "--mode".into(),
            "chain".into(),
            "--corpus".into(),
            arg(corpus.clone()),
            "--passages".into(),
            arg(run.join("passages.jsonl")),
            "--summaries".into(),
            arg(run.join("summaries.jsonl")),
            "--mock".into(),
            arg(inputs.join("replies_generate.jsonl")),
            "--out".into(),
            arg(run.join("generated.jsonl")),
        ],
        vec![
            "evaluate".into(),
            "--generated".into(),
            arg(run.join("generated.jsonl")),
            "--corpus".into(),
            arg(corpus.clone()),
            "--metrics".into(),
            "rouge1,judge".into(),
            "--summaries".into(),
            arg(run.join("summaries.jsonl")),
            "--mock".into(),
            arg(inputs.join("replies_judge.jsonl")),
            "--out".into(),
            arg(run.join("report.json")),
        ],
    ] {
        let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let out = limgen(&refs);
        assert_code(&out, 0, &format!("pipeline stage {:?}", refs[0]));
    }

    let after: Vec<(String, Vec<u8>)> = {
        let mut entries: Vec<_> = std::fs::read_dir(&inputs)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        entries
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect()
    };
    assert_eq!(before, after, "input files must come through a run untouched");
}

#[test]
fn malformed_corpus_rows_warn_and_are_counted() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("raw.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"id\":\"ok-1\",\"venue\":\"ACL\",\"year\":2024,\"sections\":[{\"heading\":\"Method\",\"text\":\"Words here.\"},{\"heading\":\"Limitations\",\"text\":\"One limit.\"}]}\n",
            "this line is not json\n",
            "{\"id\":\"ok-2\",\"venue\":\"ACL\",\"year\":2024,\"sections\":[{\"heading\":\"Method\",\"text\":\"More words.\"}]}\n",
        ),
    )
    .unwrap();

    let corpus = tmp.path().join("corpus");
    let out = limgen(&[
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "ingest with one bad row");
    assert!(
        stdout(&out).contains("ingested 2 papers (1 without limitations, 1 malformed rows skipped)"),
        "counts should be reported: {}",
        stdout(&out)
    );
    assert!(
        stderr(&out).contains("warning"),
        "bad rows should warn on stderr: {}",
        stderr(&out)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(corpus.join("ingest_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["loaded"], 2);
    assert_eq!(report["missing_limitations"], 1);
    assert_eq!(report["malformed"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_rating_rows_are_rejected_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let ratings = tmp.path().join("ratings.jsonl");
    std::fs::write(
        &ratings,
        concat!(
            "{\"paper_id\":\"p1\",\"system\":\"chain\",\"annotator\":\"a1\",\"q1\":\"yes\",\"q2\":\"no\",\"q3\":\"partial\",\"q4\":\"yes\"}\n",
            "{\"paper_id\":\"p2\",\"system\":\"chain\",\"annotator\":\"a1\",\"q1\":\"maybe\",\"q2\":\"no\",\"q3\":\"no\",\"q4\":\"no\"}\n",
            "{\"paper_id\":\"p3\",\"system\":\"full\",\"annotator\":\"a2\",\"q1\":\"no\",\"q2\":\"yes\",\"q3\":\"yes\",\"q4\":\"partial\",\"category\":\"dataset\"}\n",
        ),
    )
    .unwrap();

    let report_path = tmp.path().join("table.json");
    let out = limgen(&[
        "human-eval",
        "aggregate",
        "--records",
        ratings.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "aggregate with one bad row");
    assert!(
        stdout(&out).contains("aggregated 2 rating rows across 2 systems (1 rejected)"),
        "stdout: {}",
        stdout(&out)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["total_records"], 2);
    assert_eq!(report["rejected"].as_array().unwrap().len(), 1);
}

#[test]
fn a_dry_replies_file_fails_the_run_instead_of_degrading() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = ingest_golden(tmp.path());

    // One reply for three papers: summarize must stop with an error rather
    // than write a partial summaries file.
    let short = tmp.path().join("short.jsonl");
    std::fs::write(&short, "\"Only one summary.\"\n").unwrap();
    let out = limgen(&[
        "summarize",
        "--corpus",
        corpus.to_str().unwrap(),
        "--mock",
        short.to_str().unwrap(),
        "--out",
        tmp.path().join("summaries.jsonl").to_str().unwrap(),
    ]);
    assert_code(&out, 1, "summarize with a dry replies file");
    assert!(
        stderr(&out).contains("no replies left"),
        "stderr should say the script ran dry: {}",
        stderr(&out)
    );
    assert!(
        !tmp.path().join("summaries.jsonl").exists(),
        "a failed run must not leave a partial summaries file"
    );

    // Chain generation exhausting mid-paper likewise stops the whole run;
    // a dry script is a setup bug, not a per-paper failure to record.
    let passages = tmp.path().join("passages.jsonl");
    let out = limgen(&[
        "chunk",
        "--corpus",
        corpus.to_str().unwrap(),
        "--budget",
        "32",
        "--out",
        passages.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "chunk for the dry-generate check");

    let three = tmp.path().join("three.jsonl");
    std::fs::write(
        &three,
        "\"First.\"\n\"Second.\"\n\"- First.\\n- Second.\"\n",
    )
    .unwrap();
    let out = limgen(&[
        "generate",
        "--mode",
        "chain",
        "--corpus",
        corpus.to_str().unwrap(),
        "--passages",
        passages.to_str().unwrap(),
        "--summaries",
        fixture("golden/expected/summaries.jsonl").to_str().unwrap(),
        "--mock",
        three.to_str().unwrap(),
        "--out",
        tmp.path().join("generated.jsonl").to_str().unwrap(),
    ]);
    assert_code(&out, 1, "chain generate with too few replies");
    assert!(
        stderr(&out).contains("no replies left"),
        "stderr: {}",
        stderr(&out)
    );
    assert!(
        !tmp.path().join("generated.jsonl").exists(),
        "a failed run must not leave a partial generations file"
    );
}
