//! Human rating records and per-system aggregation tables.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Yes,
    No,
    Partial,
}

impl Rating {
    fn parse(value: &str) -> Option<Rating> {
        match value.trim().to_lowercase().as_str() {
            "yes" => Some(Rating::Yes),
            "no" => Some(Rating::No),
            "partial" => Some(Rating::Partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitationCategory {
    Methodology,
    Dataset,
    Evaluation,
    ExperimentalSetup,
}

impl LimitationCategory {
    pub fn name(&self) -> &'static str {
        match self {
            LimitationCategory::Methodology => "methodology",
            LimitationCategory::Dataset => "dataset",
            LimitationCategory::Evaluation => "evaluation",
            LimitationCategory::ExperimentalSetup => "experimental_setup",
        }
    }

    fn parse(value: &str) -> Option<LimitationCategory> {
        match value.trim().to_lowercase().replace([' ', '-'], "_").as_str() {
            "methodology" => Some(LimitationCategory::Methodology),
            "dataset" => Some(LimitationCategory::Dataset),
            "evaluation" => Some(LimitationCategory::Evaluation),
            "experimental_setup" => Some(LimitationCategory::ExperimentalSetup),
            _ => None,
        }
    }
}

/// One annotator's judgment of one system's output for one paper. The four
/// questions rate coverage, faithfulness, specificity, and usefulness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalRecord {
    pub paper_id: String,
    pub system: String,
    pub annotator: String,
    pub q1: Rating,
    pub q2: Rating,
    pub q3: Rating,
    pub q4: Rating,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub category: Option<LimitationCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    paper_id: String,
    system: String,
    annotator: String,
    q1: String,
    q2: String,
    q3: String,
    q4: String,
    #[serde(default)]
    category: Option<String>,
}

/// Load rating rows from JSONL. Rows with unknown rating or category values
/// are rejected individually and reported, never silently dropped.
pub fn load_human_eval_records(path: &Path) -> Result<(Vec<HumanEvalRecord>, Vec<RejectedRow>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                rejected.push(RejectedRow {
                    line: line_no,
                    reason: format!("invalid row: {e}"),
                });
                continue;
            }
        };
        match record_from_raw(raw) {
            Ok(rec) => records.push(rec),
            Err(reason) => rejected.push(RejectedRow {
                line: line_no,
                reason,
            }),
        }
    }
    Ok((records, rejected))
}

fn record_from_raw(raw: RawRecord) -> std::result::Result<HumanEvalRecord, String> {
    if raw.system.trim().is_empty() {
        return Err("empty system name".to_string());
    }
    if raw.paper_id.trim().is_empty() {
        return Err("empty paper id".to_string());
    }
    let parse_q = |name: &str, value: &str| {
        Rating::parse(value).ok_or_else(|| format!("unknown rating value `{value}` for {name}"))
    };
    let category = match &raw.category {
        None => None,
        Some(value) => Some(
            LimitationCategory::parse(value)
                .ok_or_else(|| format!("unknown category `{value}`"))?,
        ),
    };
    Ok(HumanEvalRecord {
        q1: parse_q("q1", &raw.q1)?,
        q2: parse_q("q2", &raw.q2)?,
        q3: parse_q("q3", &raw.q3)?,
        q4: parse_q("q4", &raw.q4)?,
        paper_id: raw.paper_id,
        system: raw.system,
        annotator: raw.annotator,
        category,
    })
}

/// Counts and percentages for one question within one system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionBreakdown {
    pub yes: usize,
    pub no: usize,
    pub partial: usize,
    pub pct_yes: f64,
    pub pct_no: f64,
    pub pct_partial: f64,
}

impl QuestionBreakdown {
    fn add(&mut self, rating: Rating) {
        match rating {
            Rating::Yes => self.yes += 1,
            Rating::No => self.no += 1,
            Rating::Partial => self.partial += 1,
        }
    }

    fn finalize(&mut self) {
        let total = (self.yes + self.no + self.partial) as f64;
        if total > 0.0 {
            self.pct_yes = 100.0 * self.yes as f64 / total;
            self.pct_no = 100.0 * self.no as f64 / total;
            self.pct_partial = 100.0 * self.partial as f64 / total;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemAggregate {
    pub records: usize,
    /// Breakdown per question, q1 through q4.
    pub questions: Vec<QuestionBreakdown>,
    /// Count of records per limitation category, for rows that carry one.
    pub categories: BTreeMap<String, usize>,
}

/// Per-system aggregation table, keyed by system name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalTable {
    pub per_system: BTreeMap<String, SystemAggregate>,
    pub total_records: usize,
}

/// Tally ratings per system and question. Percentages always sum to 100
/// within a question (up to rounding); an empty input yields an empty table.
pub fn aggregate_human_eval(records: &[HumanEvalRecord]) -> HumanEvalTable {
    let mut per_system: BTreeMap<String, SystemAggregate> = BTreeMap::new();
    for rec in records {
        let agg = per_system.entry(rec.system.clone()).or_insert_with(|| {
            SystemAggregate {
                records: 0,
                questions: vec![QuestionBreakdown::default(); 4],
                categories: BTreeMap::new(),
            }
        });
        agg.records += 1;
        agg.questions[0].add(rec.q1);
        agg.questions[1].add(rec.q2);
        agg.questions[2].add(rec.q3);
        agg.questions[3].add(rec.q4);
        if let Some(cat) = rec.category {
            *agg.categories.entry(cat.name().to_string()).or_insert(0) += 1;
        }
    }
    for agg in per_system.values_mut() {
        for q in &mut agg.questions {
            q.finalize();
        }
    }
    HumanEvalTable {
        total_records: records.len(),
        per_system,
    }
}
