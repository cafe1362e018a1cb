//! Embedding-based greedy token matching: precision averages each candidate
//! token's best cosine against the reference tokens, recall mirrors it, and
//! F1 is their harmonic mean. No idf weighting or score rescaling.

use serde::{Deserialize, Serialize};

use super::rouge::f1;
use crate::chunker::Tokenizer;
use crate::client::EmbeddingClient;
use crate::error::{Error, Result};
use crate::retrieval::{cosine, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn mean_best_similarity(from: &[EmbeddingVector], to: &[EmbeddingVector]) -> Result<f64> {
    let mut total = 0.0;
    for a in from {
        let mut best = f64::NEG_INFINITY;
        for b in to {
            best = best.max(cosine(a, b)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

/// Greedy-match score between candidate and reference. Both texts must
/// tokenize to at least one token; token embeddings come from `client`.
pub fn greedy_match_score(
    candidate: &str,
    reference: &str,
    client: &dyn EmbeddingClient,
    tok: &dyn Tokenizer,
) -> Result<MatchScore> {
    let cand_tokens: Vec<String> = tok.tokenize(candidate).iter().map(|t| t.to_string()).collect();
    let ref_tokens: Vec<String> = tok.tokenize(reference).iter().map(|t| t.to_string()).collect();
    if cand_tokens.is_empty() {
        return Err(Error::EmptyText {
            what: "candidate".to_string(),
            metric: "greedy match".to_string(),
        });
    }
    if ref_tokens.is_empty() {
        return Err(Error::EmptyText {
            what: "reference".to_string(),
            metric: "greedy match".to_string(),
        });
    }
    let cand_emb = client.embed(&cand_tokens)?;
    let ref_emb = client.embed(&ref_tokens)?;
    let precision = mean_best_similarity(&cand_emb, &ref_emb)?;
    let recall = mean_best_similarity(&ref_emb, &cand_emb)?;
    Ok(MatchScore {
        precision,
        recall,
        f1: f1(precision, recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::DefaultTokenizer;
    use crate::client::DeterministicEmbedder;
    use std::collections::BTreeMap;

    const EPS: f64 = 1e-12;

    /// Maps each token to a fixed vector; unknown tokens get a distinct
    /// fallback axis.
    struct TableEmbedder {
        table: BTreeMap<String, Vec<f64>>,
        fallback: Vec<f64>,
    }

    impl EmbeddingClient for TableEmbedder {
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
            Ok(texts
                .iter()
                .map(|t| EmbeddingVector {
                    values: self.table.get(t).unwrap_or(&self.fallback).clone(),
                    model: "table".to_string(),
                })
                .collect())
        }

        fn model_name(&self) -> &str {
            "table"
        }
    }

    fn table(entries: &[(&str, &[f64])], fallback: &[f64]) -> TableEmbedder {
        TableEmbedder {
            table: entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
            fallback: fallback.to_vec(),
        }
    }

    #[test]
    fn identical_tokens_score_one() {
        let client = table(
            &[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0])],
            &[0.0, 0.0, 1.0],
        );
        let s = greedy_match_score("a b", "a b", &client, &DefaultTokenizer).unwrap();
        assert!((s.precision - 1.0).abs() < EPS);
        assert!((s.recall - 1.0).abs() < EPS);
        assert!((s.f1 - 1.0).abs() < EPS);
    }

    #[test]
    fn constructed_orthogonal_vectors_hand_computed() {
        // Candidate tokens x, y; reference tokens x, z. x matches x at 1.0;
        // y and z are orthogonal to everything else: P = (1 + 0) / 2 = 0.5,
        // R = 0.5, F1 = 0.5.
        let client = table(
            &[
                ("x", &[1.0, 0.0, 0.0, 0.0]),
                ("y", &[0.0, 1.0, 0.0, 0.0]),
                ("z", &[0.0, 0.0, 1.0, 0.0]),
            ],
            &[0.0, 0.0, 0.0, 1.0],
        );
        let s = greedy_match_score("x y", "x z", &client, &DefaultTokenizer).unwrap();
        assert!((s.precision - 0.5).abs() < EPS);
        assert!((s.recall - 0.5).abs() < EPS);
        assert!((s.f1 - 0.5).abs() < EPS);
    }

    #[test]
    fn asymmetric_lengths_hand_computed() {
        // Candidate "x", reference "x y y": P = 1.0 (x finds x);
        // R = (1 + 0 + 0) / 3.
        let client = table(
            &[("x", &[1.0, 0.0, 0.0]), ("y", &[0.0, 1.0, 0.0])],
            &[0.0, 0.0, 1.0],
        );
        let s = greedy_match_score("x", "x y y", &client, &DefaultTokenizer).unwrap();
        assert!((s.precision - 1.0).abs() < EPS);
        assert!((s.recall - 1.0 / 3.0).abs() < EPS);
        let expected_f1 = 2.0 * 1.0 * (1.0 / 3.0) / (1.0 + 1.0 / 3.0);
        assert!((s.f1 - expected_f1).abs() < EPS);
    }

    #[test]
    fn swapping_texts_swaps_precision_and_recall() {
        let client = DeterministicEmbedder::default();
        let a = "the data is small";
        let b = "small models only";
        let ab = greedy_match_score(a, b, &client, &DefaultTokenizer).unwrap();
        let ba = greedy_match_score(b, a, &client, &DefaultTokenizer).unwrap();
        assert!((ab.precision - ba.recall).abs() < EPS);
        assert!((ab.recall - ba.precision).abs() < EPS);
        assert!((ab.f1 - ba.f1).abs() < EPS);
    }

    #[test]
    fn identical_texts_score_one_with_hash_embedder() {
        let client = DeterministicEmbedder::default();
        let s = greedy_match_score(
            "limited to one language",
            "limited to one language",
            &client,
            &DefaultTokenizer,
        )
        .unwrap();
        assert!((s.f1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_inputs_rejected() {
        let client = DeterministicEmbedder::default();
        assert!(matches!(
            greedy_match_score("", "ok", &client, &DefaultTokenizer),
            Err(Error::EmptyText { .. })
        ));
        assert!(matches!(
            greedy_match_score("ok", "   ", &client, &DefaultTokenizer),
            Err(Error::EmptyText { .. })
        ));
    }
}
