//! The single choke-point for text generation and embeddings.
//!
//! Every provider call goes through [`LlmGateway`], which fills prompt
//! templates, validates structured output against the template's schema,
//! retries, and caps the number of in-flight requests.

mod http;
mod mock;
pub mod prompts;
pub mod shape;
pub mod testing;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::embedding::EmbeddingVector;

pub use http::HttpProvider;
pub use mock::MockProvider;
pub use prompts::{PromptTemplate, TemplateName};

pub const DEFAULT_API_KEY_ENV: &str = "SCOUT_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    OpenAi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    pub model_name: String,
    pub embedding_model_name: String,
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub embedding_dim: usize,
    pub temperature: f32,
    pub max_in_flight: usize,
    pub mock_seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o-mini".into(),
            embedding_model_name: "text-embedding-3-small".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_ms: 30_000,
            max_retries: 2,
            retry_backoff_ms: 250,
            embedding_dim: 512,
            temperature: 0.0,
            max_in_flight: 8,
            mock_seed: 0x5c007,
        }
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub template: TemplateName,
    /// Fully substituted prompt text.
    pub prompt: String,
    pub bindings: BTreeMap<String, String>,
    /// 1-based attempt number.
    pub attempt: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("transient provider error: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Fatal(String),
    #[error("provider configuration error: {0}")]
    Config(String),
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn describe(&self) -> String;
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("provider failed after {attempts} attempt(s): {source}")]
    Provider {
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("output violates schema after {attempts} attempt(s): {detail}")]
    SchemaViolation { raw: String, detail: String, attempts: u32 },
    #[error("embedding dimension {actual} does not match configured {expected}")]
    DimMismatch { expected: usize, actual: usize },
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Provider { source: ProviderError::Transient(_), .. })
    }
}

#[derive(Debug, Clone)]
pub struct StructuredResult<T> {
    pub parsed: T,
    pub raw: String,
    pub attempts: u32,
}

pub struct LlmGateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    permits: Semaphore,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway").field("provider", &self.provider.describe()).finish()
    }
}

impl LlmGateway {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Self {
        let permits = Semaphore::new(config.max_in_flight.max(1));
        Self { provider, config, permits }
    }

    /// Builds the provider named by `config.kind`.
    pub fn from_config(config: ProviderConfig) -> Result<Self, GatewayError> {
        let provider: Arc<dyn Provider> = match config.kind {
            ProviderKind::Mock => Arc::new(MockProvider::new(config.embedding_dim, config.mock_seed)),
            ProviderKind::OpenAi => Arc::new(HttpProvider::from_config(&config)?),
        };
        Ok(Self::new(provider, config))
    }

    pub fn mock() -> Self {
        Self::from_config(ProviderConfig::mock()).expect("mock provider needs no configuration")
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn describe(&self) -> String {
        self.provider.describe()
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10)))
    }

    async fn dispatch_complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        match tokio::time::timeout(self.config.timeout(), self.provider.complete(request)).await {
            Ok(r) => r,
            Err(_) => Err(ProviderError::Transient("request timed out".into())),
        }
    }

    /// Fills `template`, dispatches it, and decodes the output as `T` after
    /// validating it against the template's output schema. Schema violations
    /// are re-prompted with the parse error appended; transient provider
    /// errors are retried with exponential backoff.
    pub async fn complete_structured<T: DeserializeOwned>(
        &self,
        template: TemplateName,
        bindings: &BTreeMap<String, String>,
    ) -> Result<StructuredResult<T>, GatewayError> {
        let tpl = PromptTemplate::get(template);
        let base_prompt = tpl.fill(bindings).map_err(GatewayError::MissingBinding)?;
        let max_attempts = self.config.max_retries + 1;
        let mut prompt = base_prompt.clone();
        let mut last_violation: Option<(String, String)> = None;
        let mut attempt = 0;
        while attempt < max_attempts {
            attempt += 1;
            let request = CompletionRequest { template, prompt: prompt.clone(), bindings: bindings.clone(), attempt };
            let raw = match self.dispatch_complete(&request).await {
                Ok(raw) => raw,
                Err(ProviderError::Transient(msg)) if attempt < max_attempts => {
                    tracing::warn!(%template, attempt, "transient provider error: {msg}");
                    tokio::time::sleep(self.backoff(attempt)).await;
                    continue;
                }
                Err(source) => return Err(GatewayError::Provider { attempts: attempt, source }),
            };
            match decode::<T>(&tpl, &raw) {
                Ok(parsed) => return Ok(StructuredResult { parsed, raw, attempts: attempt }),
                Err(detail) => {
                    tracing::warn!(%template, attempt, "schema violation: {detail}");
                    prompt = format!(
                        "{base_prompt}\n\nYour previous response did not match the output schema ({detail}). \
                         Respond again with only JSON matching the output schema."
                    );
                    last_violation = Some((raw, detail));
                }
            }
        }
        let (raw, detail) = last_violation.unwrap_or_default();
        Err(GatewayError::SchemaViolation { raw, detail, attempts: attempt })
    }

    /// Embeds one batch. Order is preserved and every returned vector has
    /// the configured dimension.
    pub async fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidInput("no texts to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(GatewayError::InvalidInput(format!("text {i} is empty")));
        }
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        let raw = loop {
            attempt += 1;
            let result = {
                let _permit = self.permits.acquire().await.expect("semaphore never closed");
                match tokio::time::timeout(self.config.timeout(), self.provider.embed(texts)).await {
                    Ok(r) => r,
                    Err(_) => Err(ProviderError::Transient("request timed out".into())),
                }
            };
            match result {
                Ok(v) => break v,
                Err(ProviderError::Transient(msg)) if attempt < max_attempts => {
                    tracing::warn!(attempt, "transient embedding error: {msg}");
                    tokio::time::sleep(self.backoff(attempt)).await;
                }
                Err(source) => return Err(GatewayError::Provider { attempts: attempt, source }),
            }
        };
        if raw.len() != texts.len() {
            return Err(GatewayError::Provider {
                attempts: attempt,
                source: ProviderError::Fatal(format!("expected {} embeddings, got {}", texts.len(), raw.len())),
            });
        }
        raw.into_iter()
            .map(|v| {
                if v.len() != self.config.embedding_dim {
                    return Err(GatewayError::DimMismatch { expected: self.config.embedding_dim, actual: v.len() });
                }
                EmbeddingVector::new(v).map_err(|e| GatewayError::InvalidInput(e.to_string()))
            })
            .collect()
    }

    /// Convenience wrapper for a single text.
    pub async fn embed_one(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let mut v = self.embed_texts(&[text.to_string()]).await?;
        Ok(v.pop().expect("one text in, one vector out"))
    }
}

fn decode<T: DeserializeOwned>(tpl: &PromptTemplate, raw: &str) -> Result<T, String> {
    let mut value = shape::extract_json(raw)?;
    tpl.output_schema.conform(&mut value).map_err(|v| v.to_string())?;
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Helper for building binding maps.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::testing::ScriptedProvider;
    use super::*;

    #[derive(Debug, Deserialize)]
    struct Reform {
        query: String,
    }

    fn fast_config() -> ProviderConfig {
        ProviderConfig { retry_backoff_ms: 1, ..ProviderConfig::mock() }
    }

    fn reform_bindings() -> BTreeMap<String, String> {
        bindings([("cluster", "a; b".to_string()), ("query", "q".to_string())])
    }

    #[tokio::test]
    async fn non_json_twice_then_valid_succeeds_on_third_attempt() {
        let provider = Arc::new(ScriptedProvider::new([
            Ok("sorry, I cannot".to_string()),
            Ok("{\"query\": 3}".to_string()),
            Ok("{\"query\": \"x\", \"reason\": \"y\"}".to_string()),
        ]));
        let gw = LlmGateway::new(provider.clone(), fast_config());
        let out = gw.complete_structured::<Reform>(TemplateName::Reformulation, &reform_bindings()).await.unwrap();
        assert_eq!(out.attempts, 3);
        assert_eq!(out.parsed.query, "x");
        let prompts = provider.prompts();
        assert!(prompts[1].contains("did not match the output schema"));
        assert!(!prompts[0].contains("did not match"));
    }

    #[tokio::test]
    async fn schema_violation_after_retries_carries_raw_text() {
        let provider = Arc::new(ScriptedProvider::new(vec![Ok("nope".to_string()); 3]));
        let gw = LlmGateway::new(provider, fast_config());
        let err = gw.complete_structured::<Reform>(TemplateName::Reformulation, &reform_bindings()).await.unwrap_err();
        match err {
            GatewayError::SchemaViolation { raw, attempts, .. } => {
                assert_eq!(raw, "nope");
                assert_eq!(attempts, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[tokio::test]
    async fn transient_errors_are_retried() {
        let provider = Arc::new(ScriptedProvider::new([
            Err(ProviderError::Transient("503".into())),
            Ok("{\"query\": \"x\", \"reason\": \"y\"}".to_string()),
        ]));
        let gw = LlmGateway::new(provider, fast_config());
        let out = gw.complete_structured::<Reform>(TemplateName::Reformulation, &reform_bindings()).await.unwrap();
        assert_eq!(out.attempts, 2);
    }

    #[tokio::test]
    async fn fatal_errors_are_not_retried() {
        let provider = Arc::new(ScriptedProvider::new([Err(ProviderError::Fatal("400".into()))]));
        let gw = LlmGateway::new(provider.clone(), fast_config());
        let err = gw.complete_structured::<Reform>(TemplateName::Reformulation, &reform_bindings()).await.unwrap_err();
        assert!(matches!(err, GatewayError::Provider { attempts: 1, .. }));
        assert_eq!(provider.prompts().len(), 1);
    }

    #[tokio::test]
    async fn missing_binding_rejected_before_dispatch() {
        let gw = LlmGateway::mock();
        let err = gw
            .complete_structured::<Reform>(TemplateName::Reformulation, &bindings([("query", "q".into())]))
            .await
            .unwrap_err();
        assert!(matches!(err, GatewayError::MissingBinding(ref p) if p == "cluster"));
    }

    #[tokio::test]
    async fn embed_rejects_empty_text() {
        let gw = LlmGateway::mock();
        assert!(matches!(gw.embed_texts(&[]).await, Err(GatewayError::InvalidInput(_))));
        assert!(matches!(
            gw.embed_texts(&["ok".into(), "  ".into()]).await,
            Err(GatewayError::InvalidInput(_))
        ));
    }

    #[tokio::test]
    async fn embed_arity_and_determinism() {
        let gw = LlmGateway::mock();
        let texts: Vec<String> = (0..5).map(|i| format!("text {i}")).collect();
        let out = gw.embed_texts(&texts).await.unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|v| v.dim() == 512));
        let again = gw.embed_texts(&texts).await.unwrap();
        assert_eq!(out, again);
        let same = gw.embed_texts(&["dup".into(), "dup".into()]).await.unwrap();
        assert_eq!(same[0], same[1]);
    }

    #[tokio::test]
    async fn single_letters_are_not_parallel() {
        let gw = LlmGateway::mock();
        let v = gw.embed_texts(&["a".into(), "b".into()]).await.unwrap();
        assert!(crate::embedding::cosine(&v[0], &v[1]).unwrap() < 1.0);
    }

    #[tokio::test]
    async fn in_flight_cap_is_enforced() {
        let provider = Arc::new(testing::SlowProvider::new(Duration::from_millis(20)));
        let config = ProviderConfig { max_in_flight: 3, ..fast_config() };
        let gw = Arc::new(LlmGateway::new(provider.clone(), config));
        let mut handles = Vec::new();
        for _ in 0..12 {
            let gw = gw.clone();
            handles.push(tokio::spawn(async move { gw.embed_one("x").await.unwrap() }));
        }
        for h in handles {
            h.await.unwrap();
        }
        assert_eq!(provider.peak(), 3);
    }
}
