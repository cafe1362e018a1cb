//! Run evaluation: reference-based metrics, judge scoring, and report
//! assembly.

mod greedy;
mod human;
mod judge;
mod rouge;

use std::collections::{BTreeMap, BTreeSet};

pub use greedy::{greedy_match_score, MatchScore};
pub use human::{
    aggregate_human_eval, load_human_eval_records, HumanEvalRecord, HumanEvalTable,
    LimitationCategory, QuestionBreakdown, Rating, RejectedRow, SystemAggregate,
};
pub use judge::{llm_judge, parse_judge_score, JudgeScore};
pub use rouge::{rouge_l, rouge_n, RougeScore, RougeVariant};

use serde::{Deserialize, Serialize};

use crate::chunker::Tokenizer;
use crate::client::{parallel_map, EmbeddingClient, LlmClient};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::generation::{GenerationParams, GenerationRecord, PromptTemplate};

/// Which metrics an evaluation computes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricSet {
    pub rouge1: bool,
    pub rouge2: bool,
    pub rouge_l: bool,
    pub greedy: bool,
    pub judge: bool,
}

impl MetricSet {
    /// Parse a comma-separated metric list: rouge1, rouge2, rougeL, greedy,
    /// judge. Unknown names are rejected.
    pub fn parse(spec: &str) -> Result<MetricSet> {
        let mut set = MetricSet::default();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "rouge1" => set.rouge1 = true,
                "rouge2" => set.rouge2 = true,
                "rougeL" => set.rouge_l = true,
                "greedy" => set.greedy = true,
                "judge" => set.judge = true,
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown metric `{other}` (known: rouge1, rouge2, rougeL, greedy, judge)"
                    )))
                }
            }
        }
        if set == MetricSet::default() {
            return Err(Error::Invalid("no metrics selected".to_string()));
        }
        Ok(set)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.rouge1 {
            names.push("rouge1");
        }
        if self.rouge2 {
            names.push("rouge2");
        }
        if self.rouge_l {
            names.push("rougeL");
        }
        if self.greedy {
            names.push("greedy");
        }
        if self.judge {
            names.push("judge");
        }
        names
    }
}

/// Everything the judge metric needs at evaluation time.
pub struct JudgeConfig<'a> {
    pub client: &'a dyn LlmClient,
    pub template: &'a PromptTemplate,
    pub params: &'a GenerationParams,
    /// Per-paper summaries for judge context; papers without one fall back
    /// to a head slice of their source text.
    pub summaries: Option<&'a BTreeMap<String, String>>,
    /// Word cap for the fallback source-text context.
    pub context_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperEval {
    pub paper_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rouge1: Option<RougeScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rouge2: Option<RougeScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rouge_l: Option<RougeScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub greedy: Option<MatchScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub judge_score: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub judge_raw: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub judge_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub paper_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Metric names this report covers.
    pub metrics: Vec<String>,
    /// Papers evaluated, sorted by paper id.
    pub per_paper: Vec<PaperEval>,
    /// Arithmetic means over evaluated papers, keyed like "rouge1_f1".
    /// The judge mean covers successfully parsed scores only.
    pub means: BTreeMap<String, f64>,
    pub evaluated: usize,
    pub skipped: Vec<SkipEntry>,
    pub judge_scored: usize,
    pub judge_parse_failures: usize,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

struct RougeMeanAccum {
    prefix: &'static str,
    p: Vec<f64>,
    r: Vec<f64>,
    f: Vec<f64>,
}

impl RougeMeanAccum {
    fn new(prefix: &'static str) -> Self {
        RougeMeanAccum {
            prefix,
            p: Vec::new(),
            r: Vec::new(),
            f: Vec::new(),
        }
    }

    fn push(&mut self, p: f64, r: f64, f: f64) {
        self.p.push(p);
        self.r.push(r);
        self.f.push(f);
    }

    fn write_into(&self, means: &mut BTreeMap<String, f64>) {
        if let Some(m) = mean(&self.p) {
            means.insert(format!("{}_precision", self.prefix), m);
        }
        if let Some(m) = mean(&self.r) {
            means.insert(format!("{}_recall", self.prefix), m);
        }
        if let Some(m) = mean(&self.f) {
            means.insert(format!("{}_f1", self.prefix), m);
        }
    }
}

/// Evaluate one generation run against the corpus's reference limitation
/// blocks. Papers without a usable reference or candidate are skipped with a
/// reason; judge parse failures are recorded per paper and excluded from the
/// judge mean.
pub fn evaluate_run(
    records: &[GenerationRecord],
    corpus: &Corpus,
    metrics: &MetricSet,
    embedder: Option<&dyn EmbeddingClient>,
    judge: Option<&JudgeConfig<'_>>,
    tok: &dyn Tokenizer,
    jobs: usize,
) -> Result<EvalReport> {
    if metrics.greedy && embedder.is_none() {
        return Err(Error::Config(
            "the greedy metric needs an embedding client".to_string(),
        ));
    }
    if metrics.judge && judge.is_none() {
        return Err(Error::Config(
            "the judge metric needs a judge client and template".to_string(),
        ));
    }

    let mut report = EvalReport {
        metrics: metrics.names().iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };

    // (paper_id, candidate text, reference text) for papers that evaluate.
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for rec in records {
        if !seen.insert(&rec.paper_id) {
            report.skipped.push(SkipEntry {
                paper_id: rec.paper_id.clone(),
                reason: "duplicate record for paper".to_string(),
            });
            continue;
        }
        let Some(paper) = corpus.get(&rec.paper_id) else {
            report.skipped.push(SkipEntry {
                paper_id: rec.paper_id.clone(),
                reason: "paper not in corpus".to_string(),
            });
            continue;
        };
        let Some(block) = &paper.limitations else {
            report.skipped.push(SkipEntry {
                paper_id: rec.paper_id.clone(),
                reason: "no reference limitations".to_string(),
            });
            continue;
        };
        let candidate = rec.candidate_text();
        if candidate.trim().is_empty() {
            report.skipped.push(SkipEntry {
                paper_id: rec.paper_id.clone(),
                reason: "empty candidate".to_string(),
            });
            continue;
        }
        rows.push((rec.paper_id.clone(), candidate, block.raw_text.clone()));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let mut r1 = RougeMeanAccum::new("rouge1");
    let mut r2 = RougeMeanAccum::new("rouge2");
    let mut rl = RougeMeanAccum::new("rougeL");
    let mut gr = RougeMeanAccum::new("greedy");

    for (paper_id, candidate, reference) in &rows {
        let mut eval = PaperEval {
            paper_id: paper_id.clone(),
            rouge1: None,
            rouge2: None,
            rouge_l: None,
            greedy: None,
            judge_score: None,
            judge_raw: None,
            judge_error: None,
        };
        if metrics.rouge1 {
            let s = rouge_n(candidate, reference, 1)?;
            r1.push(s.precision, s.recall, s.f1);
            eval.rouge1 = Some(s);
        }
        if metrics.rouge2 {
            let s = rouge_n(candidate, reference, 2)?;
            r2.push(s.precision, s.recall, s.f1);
            eval.rouge2 = Some(s);
        }
        if metrics.rouge_l {
            let s = rouge_l(candidate, reference);
            rl.push(s.precision, s.recall, s.f1);
            eval.rouge_l = Some(s);
        }
        if metrics.greedy {
            let client = embedder.expect("checked above");
            let s = greedy_match_score(candidate, reference, client, tok)?;
            gr.push(s.precision, s.recall, s.f1);
            eval.greedy = Some(s);
        }
        report.per_paper.push(eval);
    }

    if metrics.judge {
        let cfg = judge.expect("checked above");
        let contexts: Vec<(usize, String, String)> = rows
            .iter()
            .enumerate()
            .map(|(i, (paper_id, candidate, _))| {
                let context = judge_context(cfg, corpus, paper_id);
                (i, context, candidate.clone())
            })
            .collect();
        let outcomes = parallel_map(&contexts, jobs, |_, (i, context, candidate)| {
            let paper_id = &rows[*i].0;
            llm_judge(cfg.client, paper_id, context, candidate, cfg.template, cfg.params)
        });
        let mut scores: Vec<f64> = Vec::new();
        for ((i, _, _), outcome) in contexts.iter().zip(outcomes) {
            let eval = &mut report.per_paper[*i];
            match outcome {
                Ok(j) => {
                    scores.push(j.score as f64);
                    report.judge_scored += 1;
                    eval.judge_score = Some(j.score);
                    eval.judge_raw = Some(j.raw_response);
                }
                Err(Error::JudgeParse { raw }) => {
                    report.judge_parse_failures += 1;
                    eval.judge_raw = Some(raw.clone());
                    eval.judge_error = Some("no standalone integer in [1,5]".to_string());
                }
                Err(other) => return Err(other),
            }
        }
        if let Some(m) = mean(&scores) {
            report.means.insert("judge_mean".to_string(), m);
        }
    }

    r1.write_into(&mut report.means);
    r2.write_into(&mut report.means);
    rl.write_into(&mut report.means);
    gr.write_into(&mut report.means);
    report.evaluated = report.per_paper.len();
    Ok(report)
}

/// Judge context for one paper: its provided summary, or a head slice of
/// its source text.
fn judge_context(cfg: &JudgeConfig<'_>, corpus: &Corpus, paper_id: &str) -> String {
    if let Some(s) = cfg.summaries.and_then(|m| m.get(paper_id)) {
        return s.clone();
    }
    let Some(paper) = corpus.get(paper_id) else {
        return String::new();
    };
    let source = crate::corpus::source_text_for_generation(paper).unwrap_or_default();
    let words: Vec<&str> = source.split_whitespace().take(cfg.context_words).collect();
    words.join(" ")
}
