//! OpenAI-compatible chat-completions and embeddings client.

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use super::{CompletionRequest, GatewayError, Provider, ProviderConfig, ProviderError};

pub struct HttpProvider {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
    model: String,
    embedding_model: String,
    embedding_dim: usize,
    temperature: f32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: usize,
    embedding: Vec<f32>,
}

impl HttpProvider {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: &ProviderConfig, api_key: String) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            base_url: config.base_url.trim_end_matches('/').to_string(),
            api_key,
            model: config.model_name.clone(),
            embedding_model: config.embedding_model_name.clone(),
            embedding_dim: config.embedding_dim,
            temperature: config.temperature,
        })
    }

    async fn post(&self, path: &str, body: serde_json::Value) -> Result<reqwest::Response, ProviderError> {
        let resp = self
            .client
            .post(format!("{}{path}", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let msg = format!("{status}: {}", text.chars().take(300).collect::<String>());
        if status.as_u16() == 429 || status.is_server_error() {
            Err(ProviderError::Transient(msg))
        } else {
            Err(ProviderError::Fatal(msg))
        }
    }
}

#[async_trait]
impl Provider for HttpProvider {
    fn describe(&self) -> String {
        format!("openai-compatible({}, {})", self.model, self.embedding_model)
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": "Respond only with JSON that follows the output schema."},
                {"role": "user", "content": request.prompt},
            ],
        });
        let resp: ChatResponse = self
            .post("/chat/completions", body)
            .await?
            .json()
            .await
            .map_err(|e| ProviderError::Fatal(format!("malformed completion response: {e}")))?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Fatal("completion response has no content".into()))
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let body = json!({
            "model": self.embedding_model,
            "input": texts,
            "dimensions": self.embedding_dim,
        });
        let mut resp: EmbeddingResponse = self
            .post("/embeddings", body)
            .await?
            .json()
            .await
            .map_err(|e| ProviderError::Fatal(format!("malformed embedding response: {e}")))?;
        resp.data.sort_by_key(|d| d.index);
        Ok(resp.data.into_iter().map(|d| d.embedding).collect())
    }
}
