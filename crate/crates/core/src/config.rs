//! Pipeline configuration: a TOML file with validated defaults.
//!
//! Secrets never live in the file. API keys are read only from the
//! environment (`LIMGEN_LLM_KEY`, `LIMGEN_EMBED_KEY`); endpoint URLs may come
//! from the file or, as a fallback, from `LIMGEN_LLM_URL` / `LIMGEN_EMBED_URL`.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chunker::MIN_PASSAGE_BUDGET;
use crate::client::{
    DeterministicEmbedder, EmbeddingClient, HttpEmbeddingClient, HttpLlmClient, RetryPolicy,
};
use crate::error::{Error, Result};

pub const ENV_LLM_URL: &str = "LIMGEN_LLM_URL";
pub const ENV_LLM_KEY: &str = "LIMGEN_LLM_KEY";
pub const ENV_EMBED_URL: &str = "LIMGEN_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "LIMGEN_EMBED_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub seed: u64,
    /// Train, validation, test fractions; must sum to 1.
    pub ratios: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 0,
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmProfile {
    /// Chat completions endpoint. Falls back to `LIMGEN_LLM_URL` when unset.
    pub url: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Prompt budget in tokenizer tokens; prompts over this are truncated.
    pub max_input_tokens: Option<usize>,
    pub retry_attempts: u32,
    pub seed: Option<u64>,
    pub stop: Vec<String>,
}

impl Default for LlmProfile {
    fn default() -> Self {
        LlmProfile {
            url: None,
            model: "gpt-4o-mini".to_string(),
            temperature: 0.0,
            max_output_tokens: 512,
            max_input_tokens: None,
            retry_attempts: 3,
            seed: None,
            stop: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// OpenAI-compatible embeddings endpoint.
    Http,
    /// Local hash-based embedder; reproducible, no network.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingProfile {
    pub kind: EmbeddingKind,
    /// Embeddings endpoint. Falls back to `LIMGEN_EMBED_URL` when unset.
    pub url: Option<String>,
    pub model: Option<String>,
    /// Dimension count for the deterministic embedder.
    pub dims: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub retry_attempts: u32,
}

impl Default for EmbeddingProfile {
    fn default() -> Self {
        EmbeddingProfile {
            kind: EmbeddingKind::Deterministic,
            url: None,
            model: None,
            dims: 64,
            seed: 0,
            batch_size: 32,
            retry_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub tokenizer: String,
    /// Passage token budget for chunking.
    pub budget: usize,
    /// Retrieval similarity floor; passages scoring below it are dropped.
    pub threshold: f64,
    /// Passages kept per query sentence.
    pub top_k: usize,
    /// Cosine similarity at or above which near-duplicate candidates fold.
    pub dedup_threshold: f64,
    /// Directory of prompt templates overriding the built-in set.
    pub prompts_dir: String,
    /// Worker threads for fan-out work; 1 means serial.
    pub jobs: usize,
    pub split: SplitConfig,
    pub llm: LlmProfile,
    pub embedding: EmbeddingProfile,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tokenizer: "default".to_string(),
            budget: 1024,
            threshold: 0.5,
            top_k: 3,
            dedup_threshold: 0.9,
            prompts_dir: "prompts".to_string(),
            jobs: 1,
            split: SplitConfig::default(),
            llm: LlmProfile::default(),
            embedding: EmbeddingProfile::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        crate::chunker::tokenizer_by_name(&self.tokenizer)?;
        if self.budget < MIN_PASSAGE_BUDGET {
            return Err(Error::Config(format!(
                "budget must be at least {MIN_PASSAGE_BUDGET}, got {}",
                self.budget
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.dedup_threshold) {
            return Err(Error::Config(format!(
                "dedup_threshold must be in [0, 1], got {}",
                self.dedup_threshold
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".to_string()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".to_string()));
        }
        let ratios = self.split.ratios;
        if ratios.iter().any(|r| *r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split.ratios must be positive and sum to 1, got {ratios:?}"
            )));
        }
        if self.embedding.dims == 0 {
            return Err(Error::Config("embedding.dims must be at least 1".to_string()));
        }
        if self.embedding.batch_size == 0 {
            return Err(Error::Config(
                "embedding.batch_size must be at least 1".to_string(),
            ));
        }
        if self.llm.retry_attempts == 0 || self.embedding.retry_attempts == 0 {
            return Err(Error::Config(
                "retry_attempts must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Snapshot for run manifests, with secrets impossible by construction
    /// (keys are never part of the config).
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn llm_url(&self) -> Result<String> {
        if let Some(url) = &self.llm.url {
            return Ok(url.clone());
        }
        std::env::var(ENV_LLM_URL).map_err(|_| {
            Error::Config(format!(
                "no LLM endpoint: set llm.url in the config or {ENV_LLM_URL} in the environment"
            ))
        })
    }

    fn embed_url(&self) -> Result<String> {
        if let Some(url) = &self.embedding.url {
            return Ok(url.clone());
        }
        std::env::var(ENV_EMBED_URL).map_err(|_| {
            Error::Config(format!(
                "no embeddings endpoint: set embedding.url in the config or {ENV_EMBED_URL} in the environment"
            ))
        })
    }

    pub fn llm_client(&self) -> Result<HttpLlmClient> {
        let retry = RetryPolicy {
            max_attempts: self.llm.retry_attempts,
            base_delay: Duration::from_millis(250),
        };
        HttpLlmClient::new(
            self.llm_url()?,
            self.llm.model.clone(),
            std::env::var(ENV_LLM_KEY).ok(),
            retry,
        )
    }

    pub fn embedding_client(&self) -> Result<Box<dyn EmbeddingClient>> {
        match self.embedding.kind {
            EmbeddingKind::Deterministic => Ok(Box::new(DeterministicEmbedder::new(
                self.embedding.dims,
                self.embedding.seed,
            )?)),
            EmbeddingKind::Http => {
                let model = self.embedding.model.clone().ok_or_else(|| {
                    Error::Config("embedding.model is required when embedding.kind = \"http\"".to_string())
                })?;
                let retry = RetryPolicy {
                    max_attempts: self.embedding.retry_attempts,
                    base_delay: Duration::from_millis(250),
                };
                Ok(Box::new(HttpEmbeddingClient::new(
                    self.embed_url()?,
                    model,
                    std::env::var(ENV_EMBED_KEY).ok(),
                    retry,
                    self.embedding.batch_size,
                )?))
            }
        }
    }

    pub fn generation_params(&self) -> crate::generation::GenerationParams {
        crate::generation::GenerationParams {
            temperature: self.llm.temperature,
            max_output_tokens: self.llm.max_output_tokens,
            stop: self.llm.stop.clone(),
            seed: self.llm.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn loads_partial_toml_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("limgen.toml");
        std::fs::write(
            &path,
            r#"
budget = 128
threshold = 0.35

[split]
seed = 7
ratios = [0.6, 0.2, 0.2]

[llm]
model = "local-model"
temperature = 0.2

[embedding]
kind = "http"
url = "http://localhost:9999/v1/embeddings"
model = "embedder"
"#,
        )
        .unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.budget, 128);
        assert_eq!(config.threshold, 0.35);
        assert_eq!(config.top_k, 3);
        assert_eq!(config.split.seed, 7);
        assert_eq!(config.split.ratios, [0.6, 0.2, 0.2]);
        assert_eq!(config.llm.model, "local-model");
        assert_eq!(config.llm.temperature, 0.2);
        assert_eq!(config.llm.max_output_tokens, 512);
        assert_eq!(config.embedding.kind, EmbeddingKind::Http);
        assert_eq!(
            config.embedding.url.as_deref(),
            Some("http://localhost:9999/v1/embeddings")
        );
    }

    #[test]
    fn unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("limgen.toml");
        std::fs::write(&path, "bugdet = 128\n").unwrap();
        let err = PipelineConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn out_of_range_threshold_is_rejected() {
        let config = PipelineConfig {
            threshold: 1.5,
            ..PipelineConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("threshold"), "got {err}");
    }

    #[test]
    fn tiny_budget_is_rejected() {
        let config = PipelineConfig {
            budget: 8,
            ..PipelineConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("budget"), "got {err}");
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let mut config = PipelineConfig::default();
        config.split.ratios = [0.5, 0.2, 0.2];
        assert!(config.validate().is_err());
        config.split.ratios = [1.2, -0.1, -0.1];
        assert!(config.validate().is_err());
    }

    #[test]
    fn snapshot_has_no_secret_fields() {
        let snapshot = PipelineConfig::default().snapshot();
        let text = snapshot.to_string();
        assert!(!text.contains("key"), "config snapshot must not carry secrets");
    }

    #[test]
    fn deterministic_embedder_needs_no_endpoint() {
        let config = PipelineConfig::default();
        let client = config.embedding_client().unwrap();
        assert_eq!(client.model_name(), "hash-ngram-64");
    }

    #[test]
    fn http_embedder_requires_model() {
        let mut config = PipelineConfig::default();
        config.embedding.kind = EmbeddingKind::Http;
        config.embedding.url = Some("http://localhost:1/v1/embeddings".to_string());
        let err = match config.embedding_client() {
            Err(e) => e,
            Ok(_) => panic!("expected a missing-model error"),
        };
        assert!(err.to_string().contains("embedding.model"), "got {err}");
    }

    #[test]
    fn config_url_wins_over_missing_env() {
        let mut config = PipelineConfig::default();
        config.llm.url = Some("http://example.test/v1/chat/completions".to_string());
        // Succeeds without any environment variables set.
        config.llm_client().unwrap();
    }
}
