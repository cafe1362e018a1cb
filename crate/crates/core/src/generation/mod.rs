//! Limitation generation: single-shot, per-passage, and two-stage chain
//! orchestration against a completion client.

mod parse;
mod prompt;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

pub use parse::parse_limitations;
pub use prompt::{PromptSet, PromptTemplate, RenderedPrompt, TemplateRole, KNOWN_SLOTS};

use serde::{Deserialize, Serialize};

use crate::chunker::{normalize_whitespace, Passage, Tokenizer};
use crate::client::{parallel_map, EmbeddingClient, LlmClient};
use crate::corpus::{source_text_for_generation, LimitationBlock, Paper};
use crate::error::{Error, Result};
use crate::manifest::sha256_hex;
use crate::retrieval::cosine;

/// Sampling and decoding controls passed through to the completion client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub stop: Vec<String>,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_output_tokens: 512,
            stop: Vec::new(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    Full,
    Dpr,
    Chain,
    ChainContinuous,
}

impl GenerationMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(GenerationMode::Full),
            "dpr" => Ok(GenerationMode::Dpr),
            "chain" => Ok(GenerationMode::Chain),
            "chain-continuous" => Ok(GenerationMode::ChainContinuous),
            other => Err(Error::Invalid(format!(
                "unknown mode `{other}` (known: full, dpr, chain, chain-continuous)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GenerationMode::Full => "full",
            GenerationMode::Dpr => "dpr",
            GenerationMode::Chain => "chain",
            GenerationMode::ChainContinuous => "chain-continuous",
        }
    }
}

/// Which orchestration step produced a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Full,
    Dpr,
    ChainStage1,
    ChainStage2,
    ChainContinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedItem {
    pub text: String,
    /// Passage the item came from; absent for whole-paper generations and
    /// refined outputs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_passage_index: Option<usize>,
}

/// Candidate limitations for one paper at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLimitations {
    pub paper_id: String,
    pub stage: Stage,
    pub items: Vec<GeneratedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub passage_index: Option<usize>,
    pub error: String,
}

/// One output row of a generation run: the final items for one paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub paper_id: String,
    pub mode: GenerationMode,
    pub items: Vec<GeneratedItem>,
    pub failures: Vec<FailureRecord>,
    pub truncated: bool,
}

impl GenerationRecord {
    /// The record's candidate text for evaluation: items joined by newlines.
    pub fn candidate_text(&self) -> String {
        let texts: Vec<&str> = self.items.iter().map(|i| i.text.as_str()).collect();
        texts.join("\n")
    }
}

pub fn load_generation_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GenerationRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Invalid(format!(
                "{}:{}: invalid generation record: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Stage toggles and parameters for chain-style runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRunConfig {
    /// Cosine similarity at or above which a later candidate is dropped in
    /// favor of an earlier one. Values above 1.0 disable the embedding pass,
    /// leaving exact-duplicate removal only.
    pub dedup_threshold: f64,
    /// Whether stage 2 runs the refinement generation; when off, the
    /// deduplicated candidates pass through verbatim.
    pub refine: bool,
    pub stage1_params: GenerationParams,
    pub stage2_params: GenerationParams,
}

impl Default for ChainRunConfig {
    fn default() -> Self {
        ChainRunConfig {
            dedup_threshold: 0.9,
            refine: true,
            stage1_params: GenerationParams::default(),
            stage2_params: GenerationParams::default(),
        }
    }
}

/// One completion with request/latency logging. The prompt must be
/// non-blank; retries live inside the client.
pub fn generate(client: &dyn LlmClient, prompt: &str, params: &GenerationParams) -> Result<String> {
    if prompt.trim().is_empty() {
        return Err(Error::Invalid("refusing to send an empty prompt".to_string()));
    }
    let started = std::time::Instant::now();
    let completion = client.complete(prompt, params)?;
    log::debug!(
        "completion: {} prompt chars -> {} completion chars in {:?}",
        prompt.len(),
        completion.len(),
        started.elapsed()
    );
    Ok(completion)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    paper_id: String,
    source_hash: String,
    summary: String,
}

/// Per-paper summary cache keyed by a hash of the paper's source text, so a
/// changed paper re-summarizes while an unchanged one never re-requests.
/// Safe for concurrent readers with single-writer appends.
pub struct SummaryCache {
    entries: RwLock<BTreeMap<String, (String, String)>>,
    writer: Option<Mutex<std::fs::File>>,
    path: Option<PathBuf>,
}

impl SummaryCache {
    pub fn in_memory() -> Self {
        SummaryCache {
            entries: RwLock::new(BTreeMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Open a file-backed cache, loading any existing lines (the last line
    /// for a paper wins) and appending new entries.
    pub fn with_file(path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for line in std::io::BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheLine = serde_json::from_str(&line)?;
                entries.insert(rec.paper_id, (rec.source_hash, rec.summary));
            }
        }
        let writer = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(SummaryCache {
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(writer)),
            path: Some(path.to_path_buf()),
        })
    }

    /// Cached summary for the paper, if its source hash still matches.
    pub fn get(&self, paper_id: &str, source_hash: &str) -> Option<String> {
        let entries = self.entries.read().unwrap();
        entries
            .get(paper_id)
            .filter(|(hash, _)| hash == source_hash)
            .map(|(_, summary)| summary.clone())
    }

    pub fn put(&self, paper_id: &str, source_hash: &str, summary: &str) -> Result<()> {
        if let Some(writer) = &self.writer {
            let line = serde_json::to_string(&CacheLine {
                paper_id: paper_id.to_string(),
                source_hash: source_hash.to_string(),
                summary: summary.to_string(),
            })?;
            let mut file = writer.lock().unwrap();
            let path = self.path.as_deref().unwrap_or_else(|| Path::new("<cache>"));
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        let mut entries = self.entries.write().unwrap();
        entries.insert(
            paper_id.to_string(),
            (source_hash.to_string(), summary.to_string()),
        );
        Ok(())
    }

    /// Paper id to summary, ignoring hashes.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.entries
            .read()
            .unwrap()
            .iter()
            .map(|(k, (_, s))| (k.clone(), s.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOutcome {
    pub summary: String,
    pub from_cache: bool,
    pub truncated: bool,
}

fn slot_map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Summarize one paper's source text, going through the cache.
pub fn summarize(
    client: &dyn LlmClient,
    paper: &Paper,
    template: &PromptTemplate,
    params: &GenerationParams,
    cache: &SummaryCache,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
) -> Result<SummaryOutcome> {
    let source = source_text_for_generation(paper)?;
    let hash = sha256_hex(source.as_bytes());
    if let Some(summary) = cache.get(&paper.id, &hash) {
        log::debug!("summary cache hit for {}", paper.id);
        return Ok(SummaryOutcome {
            summary,
            from_cache: true,
            truncated: false,
        });
    }
    let rendered = template.render_with_budget(&slot_map(&[("paper", &source)]), tok, context_limit)?;
    let completion = generate(client, &rendered.text, params)?;
    let summary = normalize_whitespace(&completion);
    if summary.is_empty() {
        return Err(Error::EmptyGeneration {
            paper_id: paper.id.clone(),
        });
    }
    cache.put(&paper.id, &hash, &summary)?;
    Ok(SummaryOutcome {
        summary,
        from_cache: false,
        truncated: rendered.truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullRunOutput {
    pub candidates: CandidateLimitations,
    pub truncated: bool,
}

/// Whole-paper generation: one completion over the full source text, parsed
/// into items.
pub fn run_full(
    client: &dyn LlmClient,
    paper: &Paper,
    template: &PromptTemplate,
    params: &GenerationParams,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
) -> Result<FullRunOutput> {
    let source = source_text_for_generation(paper)?;
    let rendered = template.render_with_budget(&slot_map(&[("paper", &source)]), tok, context_limit)?;
    if rendered.truncated {
        log::warn!("paper {} truncated to fit the context limit", paper.id);
    }
    let completion = generate(client, &rendered.text, params)?;
    let items = parse_limitations(&completion);
    if items.is_empty() {
        return Err(Error::EmptyGeneration {
            paper_id: paper.id.clone(),
        });
    }
    Ok(FullRunOutput {
        candidates: CandidateLimitations {
            paper_id: paper.id.clone(),
            stage: Stage::Full,
            items: items
                .into_iter()
                .map(|text| GeneratedItem {
                    text,
                    source_passage_index: None,
                })
                .collect(),
        },
        truncated: rendered.truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageRunOutput {
    pub candidates: CandidateLimitations,
    pub failures: Vec<FailureRecord>,
    pub truncated: bool,
}

/// One generation per passage; each completion becomes one candidate item
/// tagged with its source passage index. Per-passage failures are recorded
/// and skipped; a run where every passage fails is an error.
#[allow(clippy::too_many_arguments)]
fn generate_per_passage(
    client: &dyn LlmClient,
    paper_id: &str,
    passages: &[Passage],
    summary: Option<&str>,
    template: &PromptTemplate,
    params: &GenerationParams,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
    jobs: usize,
    stage: Stage,
) -> Result<PassageRunOutput> {
    if passages.is_empty() {
        return Err(Error::Invalid(format!(
            "paper `{paper_id}` has no passages to generate from"
        )));
    }
    let mut ordered: Vec<&Passage> = passages.iter().collect();
    ordered.sort_by_key(|p| p.index);

    let outcomes = parallel_map(&ordered, jobs, |_, passage| {
        let mut slots = slot_map(&[("passage", &passage.text)]);
        if let Some(s) = summary {
            slots.insert("summary".to_string(), s.to_string());
        }
        let rendered = template.render_with_budget(&slots, tok, context_limit)?;
        let completion = generate(client, &rendered.text, params)?;
        let text = normalize_whitespace(&completion);
        if text.is_empty() {
            return Err(Error::EmptyGeneration {
                paper_id: paper_id.to_string(),
            });
        }
        Ok((text, rendered.truncated))
    });

    let mut items = Vec::new();
    let mut failures = Vec::new();
    let mut truncated = false;
    for (passage, outcome) in ordered.iter().zip(outcomes) {
        match outcome {
            Ok((text, was_truncated)) => {
                truncated |= was_truncated;
                items.push(GeneratedItem {
                    text,
                    source_passage_index: Some(passage.index),
                });
            }
            // A dry scripted client can never serve another passage, and
            // recording the exhaustion per passage would let a mis-scripted
            // run limp on; surface it instead.
            Err(e @ Error::MockExhausted { .. }) => return Err(e),
            Err(e) => failures.push(FailureRecord {
                passage_index: Some(passage.index),
                error: e.to_string(),
            }),
        }
    }
    if items.is_empty() {
        return Err(Error::AllPassagesFailed {
            paper_id: paper_id.to_string(),
            n: passages.len(),
        });
    }
    Ok(PassageRunOutput {
        candidates: CandidateLimitations {
            paper_id: paper_id.to_string(),
            stage,
            items,
        },
        failures,
        truncated,
    })
}

/// Per-passage generation with an optional summary for context.
#[allow(clippy::too_many_arguments)]
pub fn run_dpr(
    client: &dyn LlmClient,
    paper_id: &str,
    passages: &[Passage],
    summary: Option<&str>,
    template: &PromptTemplate,
    params: &GenerationParams,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
    jobs: usize,
) -> Result<PassageRunOutput> {
    generate_per_passage(
        client,
        paper_id,
        passages,
        summary,
        template,
        params,
        tok,
        context_limit,
        jobs,
        Stage::Dpr,
    )
}

/// Chain stage 1: per-passage candidates with a required paper summary.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_stage1(
    client: &dyn LlmClient,
    paper_id: &str,
    passages: &[Passage],
    summary: &str,
    template: &PromptTemplate,
    params: &GenerationParams,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
    jobs: usize,
) -> Result<PassageRunOutput> {
    if summary.trim().is_empty() {
        return Err(Error::Invalid(format!(
            "chain stage 1 for `{paper_id}` requires a non-empty summary"
        )));
    }
    generate_per_passage(
        client,
        paper_id,
        passages,
        Some(summary),
        template,
        params,
        tok,
        context_limit,
        jobs,
        Stage::ChainStage1,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DedupReason {
    Exact,
    Similar { score: f64 },
}

/// One programmatic removal during candidate deduplication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupRemoval {
    pub removed: String,
    /// Index into the surviving list of the item this one duplicated.
    pub kept_index: usize,
    pub reason: DedupReason,
}

fn dedup_key(text: &str) -> String {
    normalize_whitespace(text)
        .to_lowercase()
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
        .to_string()
}

/// Remove duplicate candidates, earliest occurrence winning. Exact
/// duplicates (case- and trailing-punctuation-insensitive) go first; then,
/// for thresholds at most 1.0, any candidate whose embedding scores at or
/// above the threshold against an earlier survivor is dropped.
pub fn dedup_candidates(
    texts: &[String],
    client: &dyn EmbeddingClient,
    threshold: f64,
) -> Result<(Vec<String>, Vec<DedupRemoval>)> {
    let mut removals = Vec::new();
    let mut survivors: Vec<String> = Vec::new();
    let mut key_to_kept: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        let key = dedup_key(text);
        match key_to_kept.get(&key) {
            Some(&kept) => removals.push(DedupRemoval {
                removed: text.clone(),
                kept_index: kept,
                reason: DedupReason::Exact,
            }),
            None => {
                key_to_kept.insert(key, survivors.len());
                survivors.push(text.clone());
            }
        }
    }

    if threshold > 1.0 || survivors.len() < 2 {
        return Ok((survivors, removals));
    }

    let embeddings = client.embed(&survivors)?;
    let mut kept: Vec<usize> = Vec::new();
    let mut final_survivors: Vec<String> = Vec::new();
    let mut old_to_new: BTreeMap<usize, usize> = BTreeMap::new();
    // For each removed pre-embedding index, the kept index it folded into.
    let mut folded: BTreeMap<usize, usize> = BTreeMap::new();
    'candidates: for (i, text) in survivors.iter().enumerate() {
        for &k in &kept {
            let score = cosine(&embeddings[i], &embeddings[k])?;
            if score >= threshold {
                folded.insert(i, k);
                removals.push(DedupRemoval {
                    removed: text.clone(),
                    kept_index: old_to_new[&k],
                    reason: DedupReason::Similar { score },
                });
                continue 'candidates;
            }
        }
        old_to_new.insert(i, final_survivors.len());
        kept.push(i);
        final_survivors.push(text.clone());
    }
    // Exact-pass removals pointed into the pre-embedding survivor list;
    // remap onto the final list, hopping once if their survivor was itself
    // folded into an earlier one (kept items are never folded again).
    for removal in &mut removals {
        if let DedupReason::Exact = removal.reason {
            let mut idx = removal.kept_index;
            while let Some(&target) = folded.get(&idx) {
                idx = target;
            }
            removal.kept_index = old_to_new[&idx];
        }
    }
    Ok((final_survivors, removals))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Output {
    pub block: LimitationBlock,
    /// Candidates surviving deduplication, in input order.
    pub kept: Vec<String>,
    pub removals: Vec<DedupRemoval>,
    /// True when the refinement generation ran and its output was used.
    pub refined: bool,
    /// True when refinement produced nothing and the deduplicated
    /// candidates were used verbatim.
    pub fallback_used: bool,
    pub truncated: bool,
}

/// Chain stage 2: deduplicate stage-1 candidates, then refine them with one
/// generation. An empty refinement falls back to the deduplicated
/// candidates.
pub fn run_chain_stage2(
    llm: &dyn LlmClient,
    embedder: &dyn EmbeddingClient,
    candidates: &CandidateLimitations,
    template: &PromptTemplate,
    config: &ChainRunConfig,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
) -> Result<Stage2Output> {
    let texts: Vec<String> = candidates.items.iter().map(|i| i.text.clone()).collect();
    if texts.is_empty() {
        return Err(Error::Invalid(format!(
            "chain stage 2 for `{}` requires stage-1 candidates",
            candidates.paper_id
        )));
    }
    let (kept, removals) = dedup_candidates(&texts, embedder, config.dedup_threshold)?;
    log::debug!(
        "paper {}: {} candidates -> {} after dedup ({} removed)",
        candidates.paper_id,
        texts.len(),
        kept.len(),
        removals.len()
    );

    let passthrough_block = || {
        LimitationBlock::from_items(&kept).expect("deduplication keeps at least one candidate")
    };
    if !config.refine {
        return Ok(Stage2Output {
            block: passthrough_block(),
            kept,
            removals,
            refined: false,
            fallback_used: false,
            truncated: false,
        });
    }

    let listed: String = kept
        .iter()
        .map(|t| format!("- {t}"))
        .collect::<Vec<_>>()
        .join("\n");
    let rendered =
        template.render_with_budget(&slot_map(&[("candidates", &listed)]), tok, context_limit)?;
    let completion = generate(llm, &rendered.text, &config.stage2_params)?;
    let items = parse_limitations(&completion);
    if items.is_empty() {
        log::warn!(
            "paper {}: empty refinement, falling back to deduplicated candidates",
            candidates.paper_id
        );
        return Ok(Stage2Output {
            block: passthrough_block(),
            kept,
            removals,
            refined: false,
            fallback_used: true,
            truncated: rendered.truncated,
        });
    }
    let block = LimitationBlock::from_items(&items).expect("parsed items are non-empty");
    Ok(Stage2Output {
        block,
        kept,
        removals,
        refined: true,
        fallback_used: false,
        truncated: rendered.truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousOutput {
    pub block: LimitationBlock,
    pub truncated: bool,
}

/// Strictly sequential chain: each passage's prompt carries the previous
/// completion as the running candidate list, and the final completion is
/// parsed into the limitation block. Any failed step aborts the paper.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_continuous(
    client: &dyn LlmClient,
    paper_id: &str,
    passages: &[Passage],
    summary: &str,
    template: &PromptTemplate,
    params: &GenerationParams,
    tok: &dyn Tokenizer,
    context_limit: Option<usize>,
) -> Result<ContinuousOutput> {
    if passages.is_empty() {
        return Err(Error::Invalid(format!(
            "paper `{paper_id}` has no passages to generate from"
        )));
    }
    if summary.trim().is_empty() {
        return Err(Error::Invalid(format!(
            "continuous chain for `{paper_id}` requires a non-empty summary"
        )));
    }
    let mut ordered: Vec<&Passage> = passages.iter().collect();
    ordered.sort_by_key(|p| p.index);

    let mut accumulated = String::new();
    let mut truncated = false;
    for passage in ordered {
        let running = if accumulated.is_empty() {
            "(none yet)"
        } else {
            accumulated.as_str()
        };
        let slots = slot_map(&[
            ("summary", summary),
            ("passage", &passage.text),
            ("candidates", running),
        ]);
        let rendered = template.render_with_budget(&slots, tok, context_limit)?;
        truncated |= rendered.truncated;
        let completion = generate(client, &rendered.text, params)?;
        let next = completion.trim().to_string();
        if next.is_empty() {
            return Err(Error::EmptyGeneration {
                paper_id: paper_id.to_string(),
            });
        }
        accumulated = next;
    }
    let items = parse_limitations(&accumulated);
    let block = LimitationBlock::from_items(&items).ok_or_else(|| Error::EmptyGeneration {
        paper_id: paper_id.to_string(),
    })?;
    Ok(ContinuousOutput { block, truncated })
}
