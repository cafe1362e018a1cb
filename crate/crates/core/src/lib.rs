//! Batch pipeline for generating and evaluating limitation statements of
//! research papers.
//!
//! The crate covers the full path from parsed papers to scored output:
//!
//! - [`corpus`]: load JSONL paper records, pull the limitations section out
//!   as the reference target, compute corpus statistics, and cut seeded
//!   train/validation/test splits.
//! - [`chunker`]: tokenize, split sentences, and pack paper text into
//!   retrieval passages under a token budget.
//! - [`retrieval`]: embed limitation sentences and passage sentences, rank
//!   passages by best-sentence cosine similarity, and assemble per-sentence
//!   retrieval records.
//! - [`generation`]: prompt templates, completion parsing, and the run
//!   modes: whole-paper, per-passage, a two-stage chain with near-duplicate
//!   folding and refinement, and a sequential accumulate-as-you-go chain.
//! - [`eval`]: n-gram overlap and longest-common-subsequence scores,
//!   embedding greedy matching, LLM-as-judge scoring, and aggregation of
//!   human ratings.
//! - [`client`]: HTTP clients for chat and embeddings endpoints, a
//!   deterministic offline embedder, a scripted mock completion client, and
//!   a small thread-pool map.
//! - [`config`] and [`manifest`]: validated TOML configuration and
//!   provenance manifests with resume checks.
//!
//! Everything is synchronous and deterministic given fixed inputs, seeds,
//! and endpoints; fan-out is explicit via a jobs count.

pub mod chunker;
pub mod client;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod generation;
pub mod manifest;
pub mod report;
pub mod retrieval;

pub use error::{Error, Result};
