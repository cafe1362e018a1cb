//! Blocking HTTP clients for chat-completion and embedding endpoints, with
//! shared retry/backoff handling.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{check_embed_inputs, EmbeddingClient, LlmClient};
use crate::error::{Error, Result};
use crate::generation::GenerationParams;
use crate::retrieval::EmbeddingVector;

/// Exponential backoff: transport failures, 429, and 5xx responses retry up
/// to `max_attempts` total tries with delays of `base_delay * 2^attempt`.
/// Other statuses fail immediately.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    fn run<T>(&self, what: &str, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.base_delay * 2u32.saturating_pow(attempt - 1);
                log::debug!("{what}: retrying after {delay:?} (attempt {})", attempt + 1);
                std::thread::sleep(delay);
            }
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if is_retryable(&e) => {
                    log::warn!("{what}: attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        match last.expect("at least one attempt ran") {
            Error::Transport { message, .. } => Err(Error::Transport { attempts, message }),
            other => Err(other),
        }
    }
}

fn is_retryable(e: &Error) -> bool {
    match e {
        Error::Transport { .. } => true,
        Error::Endpoint { status, .. } => *status == 429 || (500..600).contains(status),
        _ => false,
    }
}

fn transport_err(e: reqwest::Error) -> Error {
    Error::Transport {
        attempts: 1,
        message: e.to_string(),
    }
}

/// Issue one POST and return the response body, mapping non-2xx statuses to
/// `Error::Endpoint`.
fn post_json(
    http: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &impl Serialize,
) -> Result<String> {
    let mut req = http.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let started = Instant::now();
    let resp = req.send().map_err(transport_err)?;
    let status = resp.status().as_u16();
    let text = resp.text().map_err(transport_err)?;
    log::debug!("POST {url} -> {status} in {:?}", started.elapsed());
    if !(200..300).contains(&status) {
        let body = if text.len() > 500 {
            format!("{}...", &text[..500])
        } else {
            text
        };
        return Err(Error::Endpoint { status, body });
    }
    Ok(text)
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Chat-completion endpoint client. The prompt travels as a single user
/// message; the first choice's message content comes back.
pub struct HttpLlmClient {
    url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
    ) -> Result<Self> {
        Ok(HttpLlmClient {
            url: url.into(),
            model: model.into(),
            api_key,
            retry,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .map_err(transport_err)?,
        })
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: params.temperature,
            max_tokens: params.max_output_tokens,
            stop: &params.stop,
            seed: params.seed,
        };
        self.retry.run("completion", || {
            let text = post_json(&self.http, &self.url, self.api_key.as_deref(), &body)?;
            let parsed: ChatResponse = serde_json::from_str(&text)
                .map_err(|e| Error::MalformedResponse(format!("chat response: {e}")))?;
            let first = parsed
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| Error::MalformedResponse("empty choices array".to_string()))?;
            Ok(first.message.content)
        })
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

/// Embedding endpoint client. Inputs are chunked to `batch_size` per
/// request; response rows are reordered by their `index` field, so output
/// order always matches input order.
pub struct HttpEmbeddingClient {
    url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    batch_size: usize,
    http: reqwest::blocking::Client,
}

impl HttpEmbeddingClient {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
        batch_size: usize,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Invalid("embedding batch size must be at least 1".into()));
        }
        Ok(HttpEmbeddingClient {
            url: url.into(),
            model: model.into(),
            api_key,
            retry,
            batch_size,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .map_err(transport_err)?,
        })
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f64>>> {
        let body = EmbeddingRequest {
            model: &self.model,
            input: batch,
        };
        self.retry.run("embedding", || {
            let text = post_json(&self.http, &self.url, self.api_key.as_deref(), &body)?;
            let parsed: EmbeddingResponse = serde_json::from_str(&text)
                .map_err(|e| Error::MalformedResponse(format!("embedding response: {e}")))?;
            if parsed.data.len() != batch.len() {
                return Err(Error::MalformedResponse(format!(
                    "expected {} embeddings, got {}",
                    batch.len(),
                    parsed.data.len()
                )));
            }
            let mut rows: Vec<Option<Vec<f64>>> = vec![None; batch.len()];
            for datum in parsed.data {
                let slot = rows.get_mut(datum.index).ok_or_else(|| {
                    Error::MalformedResponse(format!("embedding index {} out of range", datum.index))
                })?;
                if slot.replace(datum.embedding).is_some() {
                    return Err(Error::MalformedResponse(format!(
                        "duplicate embedding index {}",
                        datum.index
                    )));
                }
            }
            rows.into_iter()
                .map(|r| r.ok_or_else(|| Error::MalformedResponse("missing embedding index".into())))
                .collect()
        })
    }
}

impl EmbeddingClient for HttpEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        check_embed_inputs(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            for values in self.embed_batch(chunk)? {
                out.push(EmbeddingVector {
                    values,
                    model: self.model.clone(),
                });
            }
        }
        // Dimension uniformity and finiteness are fatal: a mixed batch
        // poisons every cosine downstream.
        if let Some(first) = out.first() {
            let expected = first.dims();
            for (index, v) in out.iter().enumerate() {
                if v.dims() != expected {
                    return Err(Error::DimMismatch {
                        expected,
                        got: v.dims(),
                        index,
                    });
                }
                if v.values.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteEmbedding { index });
                }
            }
        }
        Ok(out)
    }

    fn model_name(&self) -> &str {
        &self.model
    }
}
