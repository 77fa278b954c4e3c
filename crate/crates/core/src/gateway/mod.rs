//! The single path to language models: sampling completions, scoring
//! suffix log-probabilities and embedding text. Endpoints are either
//! OpenAI-compatible HTTP base URLs or `stub:<profile>` offline stand-ins.

mod cache;
mod http;
mod stub;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::code::{FallbackTokenizer, Tokenizer};
use crate::limit::Semaphore;
use crate::model::Provenance;

pub use cache::{request_key, ResponseCache};
pub use stub::{stub_embedding, CommonVocabulary, EMBEDDING_DIM};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("endpoint {endpoint} unavailable: {message}")]
    EndpointUnavailable { endpoint: String, message: String },
    #[error("request budget of {0} exhausted")]
    BudgetExceeded(u64),
    #[error("{tokens} tokens exceed the scorer context of {limit}")]
    ContextOverflow { tokens: usize, limit: usize },
    #[error("malformed response from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
    #[error("unknown stub profile '{0}'")]
    UnknownProfile(String),
    #[error("stub fixture: {0}")]
    Fixture(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::EndpointUnavailable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub sampler_endpoint: String,
    pub scorer_endpoint: String,
    pub embedder_endpoint: String,
    pub sampler_model: String,
    pub scorer_model: String,
    pub embedder_model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
    pub max_in_flight: usize,
    /// Requests per second per endpoint; `None` is unlimited.
    pub rate_limit: Option<f64>,
    pub max_retries: u32,
    /// Total HTTP requests allowed over the gateway's lifetime.
    pub request_budget: Option<u64>,
    /// Scorer context window in tokens of the scoring tokenizer.
    pub context_tokens: Option<usize>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            sampler_endpoint: "stub:echo".into(),
            scorer_endpoint: "stub:vocab-aware".into(),
            embedder_endpoint: "stub:hash".into(),
            sampler_model: "stub".into(),
            scorer_model: "stub".into(),
            embedder_model: "stub".into(),
            temperature: 0.8,
            max_tokens: 4096,
            request_timeout_secs: 120,
            cache_dir: None,
            seed: 0,
            max_in_flight: 8,
            rate_limit: None,
            max_retries: 3,
            request_budget: None,
            context_tokens: None,
            api_key: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub provenance: Provenance,
}

/// Per-token log-probabilities (natural log) of `prefix + suffix`.
/// Tokens before `prompt_boundary` belong to the prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
    pub prompt_boundary: usize,
}

impl ScoredText {
    pub fn suffix_logprob(&self) -> f64 {
        self.token_logprobs[self.prompt_boundary..].iter().sum()
    }

    pub fn suffix_len(&self) -> usize {
        self.tokens.len() - self.prompt_boundary
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(&Sha256::digest(prompt.as_bytes())[..8])
}

enum Backend {
    Stub(stub::Profile),
    Http(String),
}

impl Backend {
    fn parse(endpoint: &str) -> Result<Self, GatewayError> {
        match endpoint.strip_prefix("stub:") {
            Some(profile) => Ok(Backend::Stub(stub::Profile::parse(profile)?)),
            None => Ok(Backend::Http(endpoint.trim_end_matches('/').to_string())),
        }
    }
}

pub struct Gateway {
    config: GatewayConfig,
    sampler: Backend,
    scorer: Backend,
    embedder: Backend,
    tokenizer: Arc<dyn Tokenizer>,
    cache: Option<ResponseCache>,
    in_flight: Semaphore,
    last_request: Mutex<HashMap<String, Instant>>,
    requests: AtomicU64,
    client: std::sync::OnceLock<reqwest::blocking::Client>,
}

impl Gateway {
    /// `tokenizer` is the scoring model's tokenizer: stub scorers split text
    /// with it and context limits are measured in its tokens.
    pub fn new(config: GatewayConfig, tokenizer: Arc<dyn Tokenizer>) -> Result<Self, GatewayError> {
        Ok(Self {
            sampler: Backend::parse(&config.sampler_endpoint)?,
            scorer: Backend::parse(&config.scorer_endpoint)?,
            embedder: Backend::parse(&config.embedder_endpoint)?,
            cache: config.cache_dir.clone().map(ResponseCache::new),
            in_flight: Semaphore::new(config.max_in_flight),
            last_request: Mutex::new(HashMap::new()),
            requests: AtomicU64::new(0),
            client: std::sync::OnceLock::new(),
            tokenizer,
            config,
        })
    }

    pub fn offline(config: GatewayConfig) -> Result<Self, GatewayError> {
        Self::new(config, Arc::new(FallbackTokenizer))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Arc<dyn Tokenizer> {
        &self.tokenizer
    }

    /// HTTP requests issued so far (cache hits and stubs excluded).
    pub fn requests_made(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn sample(&self, prompt: &str, k: usize) -> Result<Vec<Completion>, GatewayError> {
        assert!(k >= 1, "sample needs k >= 1");
        let hash = prompt_hash(prompt);
        let texts = match &self.sampler {
            Backend::Stub(profile) => profile.sample(prompt, k, self.config.seed)?,
            Backend::Http(base) => {
                let body = http::chat_body(&self.config, prompt, k);
                let response = self.cached_post(base, "chat/completions", &self.config.sampler_model, body)?;
                http::parse_chat(base, &response, k)?
            }
        };
        Ok(texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Completion {
                text,
                provenance: Provenance {
                    model: self.config.sampler_model.clone(),
                    temperature: self.config.temperature,
                    sample_index: i,
                    prompt_hash: hash.clone(),
                },
            })
            .collect())
    }

    pub fn score_suffix(&self, prefix: &str, suffix: &str) -> Result<ScoredText, GatewayError> {
        if let Some(limit) = self.config.context_tokens {
            let tokens = self.tokenizer.count(prefix) + self.tokenizer.count(suffix);
            if tokens > limit {
                return Err(GatewayError::ContextOverflow { tokens, limit });
            }
        }
        match &self.scorer {
            Backend::Stub(profile) => profile.score(self.tokenizer.as_ref(), prefix, suffix),
            Backend::Http(base) => {
                let body = http::echo_body(&self.config, prefix, suffix);
                let response = self.cached_post(base, "completions", &self.config.scorer_model, body)?;
                http::parse_echo(base, &response, prefix)
            }
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        match &self.embedder {
            Backend::Stub(_) => Ok(texts.iter().map(|t| stub_embedding(t)).collect()),
            Backend::Http(base) => {
                let body = http::embedding_body(&self.config, texts);
                let response = self.cached_post(base, "embeddings", &self.config.embedder_model, body)?;
                http::parse_embeddings(base, &response, texts.len())
            }
        }
    }

    fn cached_post(&self, base: &str, path: &str, model: &str, body: Value) -> Result<Value, GatewayError> {
        let url = format!("{base}/{path}");
        let key = request_key(&url, model, &body);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let mut attempt = 0;
        let response = loop {
            match self.post_once(&url, &body) {
                Ok(v) => break v,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    log::warn!("retrying {url} after: {e}");
                    std::thread::sleep(Duration::from_millis(200 << attempt.min(6)));
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&key, &response) {
                log::warn!("could not write cache entry {key}: {e}");
            }
        }
        Ok(response)
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        if let Some(budget) = self.config.request_budget {
            let made = self.requests.fetch_add(1, Ordering::SeqCst);
            if made >= budget {
                self.requests.fetch_sub(1, Ordering::SeqCst);
                return Err(GatewayError::BudgetExceeded(budget));
            }
        } else {
            self.requests.fetch_add(1, Ordering::SeqCst);
        }
        let _slot = self.in_flight.acquire();
        self.pace(url);
        let client = self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(self.config.request_timeout_secs))
                .build()
                .expect("http client builds")
        });
        http::post_json(client, url, self.config.api_key.as_deref(), body)
    }

    /// Spaces consecutive requests to one endpoint by the configured rate.
    fn pace(&self, url: &str) {
        let Some(rate) = self.config.rate_limit.filter(|r| *r > 0.0) else {
            return;
        };
        let interval = Duration::from_secs_f64(1.0 / rate);
        let wait = {
            let mut last = self.last_request.lock().unwrap();
            let now = Instant::now();
            let next = last.get(url).map_or(now, |&t| (t + interval).max(now));
            last.insert(url.to_string(), next);
            next - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
