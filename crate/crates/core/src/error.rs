//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown input schema `{0}`")]
    UnknownSchema(String),

    #[error("duplicate paper id `{id}` (record {record})")]
    DuplicatePaperId { id: String, record: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("corpus has {n} papers; at least 3 are required to populate all splits")]
    CorpusTooSmall { n: usize },

    #[error("invalid split ratios {ratios:?}: {reason}")]
    InvalidRatios { ratios: [f64; 3], reason: String },

    #[error("paper `{paper_id}` has no source text after section filtering")]
    EmptySourceText { paper_id: String },

    #[error("token budget {budget} is below the minimum of {min}")]
    BudgetTooSmall { budget: usize, min: usize },

    #[error("unknown tokenizer `{0}` (known: default)")]
    UnknownTokenizer(String),

    #[error("embedding input at index {index} is empty")]
    EmptyEmbeddingInput { index: usize },

    #[error("embedding dimension mismatch in batch: expected {expected}, got {got} at index {index}")]
    DimMismatch {
        expected: usize,
        got: usize,
        index: usize,
    },

    #[error("embedding contains a non-finite value at index {index}")]
    NonFiniteEmbedding { index: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("cosine similarity requires equal dimensions ({a} vs {b})")]
    CosineDimMismatch { a: usize, b: usize },

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },

    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    #[error("mock client has no replies left (served {served})")]
    MockExhausted { served: usize },

    #[error("template `{template}` is missing required slot `{slot}`")]
    MissingSlot { template: String, slot: String },

    #[error("template `{template}` references unknown slot `{{{slot}}}`")]
    UnknownSlot { template: String, slot: String },

    #[error("no template for role `{0}` (expected file {1})")]
    MissingTemplate(String, String),

    #[error("prompt instructions alone exceed the context limit ({instruction_tokens} > {limit})")]
    PromptTooLong {
        instruction_tokens: usize,
        limit: usize,
    },

    #[error("empty generation for paper `{paper_id}`")]
    EmptyGeneration { paper_id: String },

    #[error("all {n} per-passage generations failed for paper `{paper_id}`")]
    AllPassagesFailed { paper_id: String, n: usize },

    #[error("rouge order must be 1 or 2, got {0}")]
    InvalidRougeOrder(usize),

    #[error("{what} must be non-empty for {metric}")]
    EmptyText { what: String, metric: String },

    #[error("no standalone integer in [1,5] in judge reply: {raw:?}")]
    JudgeParse { raw: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
