//! Paper corpus: JSONL ingestion, source-text assembly, descriptive stats,
//! and seeded train/valid/test splitting.
//!
//! The input format is one JSON object per line with `id`, `venue`, `year`,
//! and `sections`, where each section carries a `heading` and blank-line
//! delimited `text`. A section whose normalized heading is `limitations`
//! becomes the paper's reference limitation block and is removed from the
//! section list, so it can never leak into generation source text.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chunker::{normalize_whitespace, split_sentences, Tokenizer};
use crate::error::{Error, Result};

/// Section headings excluded from generation source text by default, in
/// normalized (lowercased, trailing punctuation stripped) form.
pub const DEFAULT_DROP_HEADINGS: &[&str] = &[
    "abstract",
    "introduction",
    "related work",
    "related works",
    "background",
    "acknowledgements",
    "acknowledgments",
    "conclusion",
    "conclusions",
    "ethics statement",
    "appendix",
    "references",
    "limitations",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSchema {
    JsonlV1,
}

impl InputSchema {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "jsonl-v1" => Ok(InputSchema::JsonlV1),
            other => Err(Error::UnknownSchema(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    /// Whitespace-normalized paragraphs, all non-empty.
    pub paragraphs: Vec<String>,
}

/// Reference limitations extracted from a paper's `Limitations` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitationBlock {
    /// Sentence segmentation of `raw_text`; non-empty when the block exists.
    pub sentences: Vec<String>,
    /// Whitespace-normalized full text.
    pub raw_text: String,
}

impl LimitationBlock {
    /// Build a block from free text. Returns `None` when nothing remains
    /// after normalization, keeping the "present implies non-empty"
    /// invariant.
    pub fn from_text(text: &str) -> Option<Self> {
        let raw_text = normalize_whitespace(text);
        if raw_text.is_empty() {
            return None;
        }
        let sentences = split_sentences(&raw_text);
        Some(LimitationBlock {
            sentences,
            raw_text,
        })
    }

    /// Build a block from discrete items by joining them with single spaces
    /// and re-segmenting, so `sentences` always matches `raw_text`.
    pub fn from_items(items: &[String]) -> Option<Self> {
        Self::from_text(&items.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub venue: String,
    pub year: i32,
    /// All non-limitation sections in document order.
    pub sections: Vec<Section>,
    pub limitations: Option<LimitationBlock>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    papers: Vec<Paper>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(papers: Vec<Paper>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (i, p) in papers.iter().enumerate() {
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicatePaperId {
                    id: p.id.clone(),
                    record: i + 1,
                });
            }
        }
        Ok(Corpus { papers, by_id })
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.by_id.get(id).map(|&i| &self.papers[i])
    }
}

/// One skipped input row and why it was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRecord {
    pub line: usize,
    pub reason: String,
}

/// Outcome counters for one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub missing_limitations: usize,
    pub malformed: Vec<MalformedRecord>,
}

impl LoadReport {
    pub fn skipped(&self) -> usize {
        self.malformed.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SectionRecord {
    heading: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PaperRecord {
    id: String,
    venue: String,
    year: i32,
    sections: Vec<SectionRecord>,
}

/// Lowercase a heading, trim it, and strip any trailing punctuation run, so
/// "Limitations:" and "LIMITATIONS" both normalize to "limitations".
pub fn normalize_heading(heading: &str) -> String {
    let lowered = normalize_whitespace(heading).to_lowercase();
    lowered
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
        .to_string()
}

/// Split section text into whitespace-normalized paragraphs at blank lines.
fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                let para = normalize_whitespace(&current.join(" "));
                if !para.is_empty() {
                    paragraphs.push(para);
                }
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        let para = normalize_whitespace(&current.join(" "));
        if !para.is_empty() {
            paragraphs.push(para);
        }
    }
    paragraphs
}

fn paper_from_record(rec: PaperRecord) -> std::result::Result<Paper, String> {
    if rec.id.trim().is_empty() {
        return Err("empty paper id".to_string());
    }
    let mut sections = Vec::new();
    let mut limitation_paragraphs: Vec<String> = Vec::new();
    for sec in rec.sections {
        let paragraphs = split_paragraphs(&sec.text);
        if paragraphs.is_empty() {
            // Sections with no surviving text are dropped, not fatal.
            continue;
        }
        if normalize_heading(&sec.heading) == "limitations" {
            limitation_paragraphs.extend(paragraphs);
        } else {
            sections.push(Section {
                heading: normalize_whitespace(&sec.heading),
                paragraphs,
            });
        }
    }
    if sections.is_empty() {
        return Err("no non-limitation sections with text".to_string());
    }
    let limitations = LimitationBlock::from_text(&limitation_paragraphs.join(" "));
    Ok(Paper {
        id: rec.id,
        venue: normalize_whitespace(&rec.venue),
        year: rec.year,
        sections,
        limitations,
    })
}

/// Load a JSONL corpus. Malformed rows are skipped and reported; duplicate
/// paper ids are fatal.
pub fn load_corpus(path: &Path, schema: InputSchema) -> Result<(Corpus, LoadReport)> {
    let InputSchema::JsonlV1 = schema;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut papers = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut report = LoadReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PaperRecord = match serde_json::from_str(&line) {
            Ok(rec) => rec,
            Err(e) => {
                report.malformed.push(MalformedRecord {
                    line: line_no,
                    reason: format!("invalid record: {e}"),
                });
                continue;
            }
        };
        let id = rec.id.clone();
        match paper_from_record(rec) {
            Ok(paper) => {
                if !seen.insert(paper.id.clone()) {
                    return Err(Error::DuplicatePaperId {
                        id: paper.id,
                        record: line_no,
                    });
                }
                if paper.limitations.is_none() {
                    report.missing_limitations += 1;
                }
                report.loaded += 1;
                papers.push(paper);
            }
            Err(reason) => {
                report.malformed.push(MalformedRecord {
                    line: line_no,
                    reason: if id.trim().is_empty() {
                        reason
                    } else {
                        format!("paper `{id}`: {reason}")
                    },
                });
            }
        }
    }
    let corpus = Corpus::new(papers)?;
    Ok((corpus, report))
}

/// Serialize a corpus back to the input JSONL schema. Limitations are
/// re-emitted as a trailing `Limitations` section, so loading the output
/// again reproduces the same corpus.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for paper in corpus.papers() {
        let mut sections: Vec<SectionRecord> = paper
            .sections
            .iter()
            .map(|s| SectionRecord {
                heading: s.heading.clone(),
                text: s.paragraphs.join("\n\n"),
            })
            .collect();
        if let Some(block) = &paper.limitations {
            sections.push(SectionRecord {
                heading: "Limitations".to_string(),
                text: block.raw_text.clone(),
            });
        }
        let rec = PaperRecord {
            id: paper.id.clone(),
            venue: paper.venue.clone(),
            year: paper.year,
            sections,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    crate::manifest::write_atomic(path, &out)
}

/// Paragraphs of every section whose normalized heading is not in
/// `drop_headings`, in document order. Drop entries are normalized before
/// comparison, so callers may pass them in any casing.
pub fn build_source_text(paper: &Paper, drop_headings: &[String]) -> Vec<String> {
    let drops: BTreeSet<String> = drop_headings.iter().map(|h| normalize_heading(h)).collect();
    let mut out = Vec::new();
    for section in &paper.sections {
        if drops.contains(&normalize_heading(&section.heading)) {
            continue;
        }
        out.extend(section.paragraphs.iter().cloned());
    }
    out
}

pub fn default_drop_headings() -> Vec<String> {
    DEFAULT_DROP_HEADINGS.iter().map(|s| s.to_string()).collect()
}

/// Source text under the default drop list, joined with newlines. Errors
/// when nothing remains.
pub fn source_text_for_generation(paper: &Paper) -> Result<String> {
    let paragraphs = build_source_text(paper, &default_drop_headings());
    if paragraphs.is_empty() {
        return Err(Error::EmptySourceText {
            paper_id: paper.id.clone(),
        });
    }
    Ok(paragraphs.join("\n"))
}

/// Means over one group of papers. Paper-level figures cover every paper in
/// the group; limitation figures cover only papers that have a reference
/// block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsBucket {
    pub paper_count: usize,
    pub papers_with_limitations: usize,
    pub mean_paper_tokens: f64,
    pub mean_paper_sentences: f64,
    pub mean_limitation_tokens: f64,
    pub mean_limitation_sentences: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub overall: StatsBucket,
    pub per_venue: BTreeMap<String, StatsBucket>,
}

#[derive(Default)]
struct StatsAccum {
    papers: usize,
    with_limitations: usize,
    paper_tokens: u64,
    paper_sentences: u64,
    limitation_tokens: u64,
    limitation_sentences: u64,
}

impl StatsAccum {
    fn add(&mut self, other: &StatsAccum) {
        self.papers += other.papers;
        self.with_limitations += other.with_limitations;
        self.paper_tokens += other.paper_tokens;
        self.paper_sentences += other.paper_sentences;
        self.limitation_tokens += other.limitation_tokens;
        self.limitation_sentences += other.limitation_sentences;
    }

    fn bucket(&self) -> StatsBucket {
        let per_paper = |total: u64| {
            if self.papers == 0 {
                0.0
            } else {
                total as f64 / self.papers as f64
            }
        };
        let per_limited = |total: u64| {
            if self.with_limitations == 0 {
                0.0
            } else {
                total as f64 / self.with_limitations as f64
            }
        };
        StatsBucket {
            paper_count: self.papers,
            papers_with_limitations: self.with_limitations,
            mean_paper_tokens: per_paper(self.paper_tokens),
            mean_paper_sentences: per_paper(self.paper_sentences),
            mean_limitation_tokens: per_limited(self.limitation_tokens),
            mean_limitation_sentences: per_limited(self.limitation_sentences),
        }
    }
}

/// Descriptive statistics under the default section drop list. Paper token
/// and sentence counts run over generation source text; limitation counts
/// run over the reference block and average only papers that have one.
pub fn compute_stats(corpus: &Corpus, tok: &dyn Tokenizer) -> CorpusStats {
    let drops = default_drop_headings();
    let mut overall = StatsAccum::default();
    let mut venues: BTreeMap<String, StatsAccum> = BTreeMap::new();
    for paper in corpus.papers() {
        let mut acc = StatsAccum {
            papers: 1,
            ..Default::default()
        };
        let paragraphs = build_source_text(paper, &drops);
        for para in &paragraphs {
            acc.paper_tokens += tok.count_tokens(para) as u64;
            acc.paper_sentences += split_sentences(para).len() as u64;
        }
        if let Some(block) = &paper.limitations {
            acc.with_limitations = 1;
            acc.limitation_tokens = tok.count_tokens(&block.raw_text) as u64;
            acc.limitation_sentences = block.sentences.len() as u64;
        }
        overall.add(&acc);
        venues.entry(paper.venue.clone()).or_default().add(&acc);
    }
    CorpusStats {
        overall: overall.bucket(),
        per_venue: venues
            .into_iter()
            .map(|(venue, acc)| (venue, acc.bucket()))
            .collect(),
    }
}

/// Disjoint, exhaustive partition of paper ids into train/valid/test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// Validate ratios: three positive values summing to 1 within 1e-9.
fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidRatios {
            ratios,
            reason: "all ratios must be positive".to_string(),
        });
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios {
            ratios,
            reason: format!("ratios sum to {sum}, expected 1"),
        });
    }
    Ok(())
}

/// Floor of `ratio * n`, nudged so exact decimal products such as 0.1 * 10
/// do not land one below an integer through float representation.
fn floor_share(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Seeded shuffle split with counts test = floor(r_test * N),
/// valid = floor(r_valid * N), train = remainder. Ids are sorted before
/// shuffling, so the same paper set and seed give the same split regardless
/// of corpus file order.
pub fn split_corpus(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    check_ratios(ratios)?;
    let n = corpus.len();
    if n < 3 {
        return Err(Error::CorpusTooSmall { n });
    }
    let mut ids: Vec<String> = corpus.papers().iter().map(|p| p.id.clone()).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let test_n = floor_share(ratios[2], n);
    let valid_n = floor_share(ratios[1], n);
    let train_n = n - valid_n - test_n;

    let train = ids[..train_n].to_vec();
    let valid = ids[train_n..train_n + valid_n].to_vec();
    let test = ids[train_n + valid_n..].to_vec();
    Ok(SplitAssignment {
        seed,
        ratios,
        train,
        valid,
        test,
    })
}
