//! Embedding and completion clients.
//!
//! Two trait objects decouple the pipeline from transport: an
//! [`EmbeddingClient`] turning text batches into vectors and an
//! [`LlmClient`] turning prompts into completions. HTTP implementations
//! speak the common chat/embeddings wire shapes; the deterministic embedder
//! and the scripted mock client cover offline runs and tests.

mod http;
mod pool;

use std::collections::VecDeque;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;

pub use http::{HttpEmbeddingClient, HttpLlmClient, RetryPolicy};
pub use pool::parallel_map;

use crate::error::{Error, Result};
use crate::generation::GenerationParams;
use crate::retrieval::EmbeddingVector;

pub trait EmbeddingClient: Send + Sync {
    /// Embed a batch. Output order matches input order and all vectors share
    /// one dimension. Every input must be non-empty.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    fn model_name(&self) -> &str;
}

pub trait LlmClient: Send + Sync {
    /// One completion for one prompt. Implementations handle their own
    /// retries; an error is final.
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String>;
}

pub(crate) fn check_embed_inputs(texts: &[String]) -> Result<()> {
    for (index, t) in texts.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::EmptyEmbeddingInput { index });
        }
    }
    Ok(())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_step(hash: u64, byte: u8) -> u64 {
    (hash ^ byte as u64).wrapping_mul(FNV_PRIME)
}

fn fnv_bytes(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash = fnv_step(hash, *b);
    }
    hash
}

/// Offline embedder: hashed character n-grams (n = 1..3) of the lowercased
/// text, signed by one hash bit, L2-normalized. The hand-rolled FNV-1a
/// keeps vectors stable across platforms and toolchain versions, unlike the
/// standard library hasher.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dims: usize,
    seed: u64,
    model: String,
}

impl DeterministicEmbedder {
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Invalid(
                "deterministic embedder needs at least 1 dimension".to_string(),
            ));
        }
        Ok(DeterministicEmbedder {
            dims,
            seed,
            model: format!("hash-ngram-{dims}"),
        })
    }

    fn basis(&self) -> u64 {
        FNV_OFFSET ^ self.seed
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let lower = text.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut acc = vec![0.0f64; self.dims];
        let mut buf = [0u8; 4];
        for n in 1..=3usize {
            if chars.len() < n {
                break;
            }
            for window in chars.windows(n) {
                // The order byte keeps "ab" as a bigram distinct from the
                // unigrams "a", "b".
                let mut h = fnv_step(self.basis(), n as u8);
                for c in window {
                    h = fnv_bytes(h, c.encode_utf8(&mut buf).as_bytes());
                }
                let bucket = (h % self.dims as u64) as usize;
                let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
                acc[bucket] += sign;
            }
        }
        let norm: f64 = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Signs cancelled exactly; fall back to a deterministic
            // one-hot so no non-empty text maps to the zero vector.
            let h = fnv_bytes(self.basis(), lower.as_bytes());
            acc[(h % self.dims as u64) as usize] = 1.0;
        } else {
            for v in &mut acc {
                *v /= norm;
            }
        }
        EmbeddingVector {
            values: acc,
            model: self.model.clone(),
        }
    }
}

impl Default for DeterministicEmbedder {
    fn default() -> Self {
        DeterministicEmbedder::new(64, 0).expect("64 dims is valid")
    }
}

impl EmbeddingClient for DeterministicEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        check_embed_inputs(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn model_name(&self) -> &str {
        &self.model
    }
}

/// Scripted completion client: serves a fixed reply sequence in order and
/// errors once exhausted, so a replies file fully determines a run.
pub struct MockLlmClient {
    state: Mutex<MockState>,
}

struct MockState {
    replies: VecDeque<String>,
    served: usize,
    prompts: Vec<String>,
}

impl MockLlmClient {
    pub fn new(replies: Vec<String>) -> Self {
        MockLlmClient {
            state: Mutex::new(MockState {
                replies: replies.into(),
                served: 0,
                prompts: Vec::new(),
            }),
        }
    }

    /// Load replies from a file with one JSON string per line. Blank lines
    /// are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut replies = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let reply: String = serde_json::from_str(&line).map_err(|e| {
                Error::Invalid(format!(
                    "replies file {}: each line must be a JSON string: {e}",
                    path.display()
                ))
            })?;
            replies.push(reply);
        }
        Ok(MockLlmClient::new(replies))
    }

    /// Prompts seen so far, in service order.
    pub fn prompts(&self) -> Vec<String> {
        self.state.lock().unwrap().prompts.clone()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().unwrap().replies.len()
    }
}

impl LlmClient for MockLlmClient {
    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String> {
        let mut state = self.state.lock().unwrap();
        state.prompts.push(prompt.to_string());
        match state.replies.pop_front() {
            Some(reply) => {
                state.served += 1;
                Ok(reply)
            }
            None => Err(Error::MockExhausted {
                served: state.served,
            }),
        }
    }
}
