//! Dense passage retrieval over limitation sentences.
//!
//! Each limitation sentence queries its paper's passages. A passage scores
//! the maximum cosine similarity between the query embedding and any of the
//! passage's sentence embeddings; passages below the similarity floor are
//! dropped, and the top-k survivors (ties to the lower passage index) become
//! the generation context for that sentence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chunker::{split_sentences, Passage};
use crate::client::EmbeddingClient;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Dense embedding with its producing model's name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model: String,
}

impl EmbeddingVector {
    pub fn dims(&self) -> usize {
        self.values.len()
    }
}

/// Cosine similarity. Errors on dimension mismatch or a zero vector.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::CosineDimMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// One retained passage for one query sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub paper_id: String,
    /// Index of the query sentence within the paper's limitation block.
    pub query_sentence_index: usize,
    pub passage_index: usize,
    pub score: f64,
}

/// One generation input: a limitation sentence with its retrieved passages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DprRecord {
    pub paper_id: String,
    pub target_limitation_sentence: String,
    /// Retained passage texts, best first.
    pub passages: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// Rank passages for one query embedding. `passage_sentences[i]` holds the
/// embeddings of passage i's sentences. Passages scoring below `threshold`
/// are dropped; the rest are sorted by descending score, ties broken by the
/// lower passage index, and truncated to `top_k`.
pub fn rank_passages(
    query: &EmbeddingVector,
    passage_sentences: &[Vec<EmbeddingVector>],
    threshold: f64,
    top_k: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (idx, sentences) in passage_sentences.iter().enumerate() {
        let mut best: Option<f64> = None;
        for emb in sentences {
            let sim = cosine(query, emb)?;
            best = Some(best.map_or(sim, |b: f64| b.max(sim)));
        }
        // A passage with no sentences can never score.
        if let Some(score) = best {
            if score >= threshold {
                scored.push((idx, score));
            }
        }
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(top_k);
    Ok(scored)
}

/// Batched embedding lookups keyed by text. Texts are deduplicated before
/// the client call; every text embeds exactly once per build.
struct EmbeddingTable {
    by_text: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingTable {
    fn build(client: &dyn EmbeddingClient, texts: &[String]) -> Result<Self> {
        let mut unique: Vec<String> = Vec::new();
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        for t in texts {
            if seen.insert(t.as_str(), ()).is_none() {
                unique.push(t.clone());
            }
        }
        let mut by_text = BTreeMap::new();
        if !unique.is_empty() {
            let embeddings = client.embed(&unique)?;
            for (text, emb) in unique.into_iter().zip(embeddings) {
                by_text.insert(text, emb);
            }
        }
        Ok(EmbeddingTable { by_text })
    }

    fn get(&self, text: &str) -> &EmbeddingVector {
        &self.by_text[text]
    }
}

/// Retrieval-augmented records and the score table behind them.
#[derive(Debug, Clone, Default)]
pub struct DprBuild {
    pub records: Vec<DprRecord>,
    pub results: Vec<RetrievalResult>,
    /// Papers skipped for missing limitations or passages.
    pub skipped: Vec<(String, String)>,
}

/// Build one DPR record per limitation sentence of every paper that has both
/// a limitation block and passages. Records come out ordered by paper id,
/// then sentence index. `summaries` optionally attaches a per-paper summary.
pub fn build_dpr_dataset(
    corpus: &Corpus,
    passages: &[Passage],
    client: &dyn EmbeddingClient,
    threshold: f64,
    top_k: usize,
    summaries: Option<&BTreeMap<String, String>>,
) -> Result<DprBuild> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Invalid(format!(
            "retrieval threshold {threshold} outside [0, 1]"
        )));
    }
    if top_k == 0 {
        return Err(Error::Invalid("top_k must be at least 1".to_string()));
    }

    let mut by_paper: BTreeMap<&str, Vec<&Passage>> = BTreeMap::new();
    for p in passages {
        by_paper.entry(p.paper_id.as_str()).or_default().push(p);
    }
    for list in by_paper.values_mut() {
        list.sort_by_key(|p| p.index);
    }

    let mut build = DprBuild::default();
    for (paper_id, paper_passages) in &by_paper {
        let Some(paper) = corpus.get(paper_id) else {
            build
                .skipped
                .push((paper_id.to_string(), "not in corpus".to_string()));
            continue;
        };
        let Some(block) = &paper.limitations else {
            build
                .skipped
                .push((paper_id.to_string(), "no limitation block".to_string()));
            continue;
        };

        // One embedding batch per paper: all query sentences plus all
        // passage sentences.
        let passage_sentences: Vec<Vec<String>> = paper_passages
            .iter()
            .map(|p| split_sentences(&p.text))
            .collect();
        let mut batch: Vec<String> = block.sentences.clone();
        for sents in &passage_sentences {
            batch.extend(sents.iter().cloned());
        }
        let table = EmbeddingTable::build(client, &batch)?;

        let embedded: Vec<Vec<EmbeddingVector>> = passage_sentences
            .iter()
            .map(|sents| sents.iter().map(|s| table.get(s).clone()).collect())
            .collect();

        let summary = summaries.and_then(|m| m.get(*paper_id).cloned());
        for (sent_idx, sentence) in block.sentences.iter().enumerate() {
            let ranked = rank_passages(table.get(sentence), &embedded, threshold, top_k)?;
            for &(passage_index, score) in &ranked {
                build.results.push(RetrievalResult {
                    paper_id: paper_id.to_string(),
                    query_sentence_index: sent_idx,
                    passage_index: paper_passages[passage_index].index,
                    score,
                });
            }
            build.records.push(DprRecord {
                paper_id: paper_id.to_string(),
                target_limitation_sentence: sentence.clone(),
                passages: ranked
                    .iter()
                    .map(|&(i, _)| paper_passages[i].text.clone())
                    .collect(),
                summary: summary.clone(),
            });
        }
    }
    Ok(build)
}
