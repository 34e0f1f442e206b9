//! Typed HTTP client for the dataset search service.

use reqwest::{StatusCode, Url};
use serde::de::DeserializeOwned;
use thiserror::Error;

use scout_core::api::{
    AttributeSearchResponse, DatasetDetail, ErrorBody, HealthResponse, RelevanceResponse, SearchRequest, SearchResponse,
    SuggestionsResponse,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid service url {0:?}")]
    Url(String),
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("service returned {status}: {message}")]
    Api { status: u16, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            Self::Api { status, .. } => Some(*status),
            Self::Http(e) => e.status().map(|s| s.as_u16()),
            Self::Url(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoutClient {
    base: Url,
    http: reqwest::Client,
}

impl ScoutClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let base = Url::parse(base_url).map_err(|_| ClientError::Url(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::Url(base_url.to_string()));
        }
        Ok(Self { base, http: reqwest::Client::new() })
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("base url").pop_if_empty().extend(segments);
        url
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|e| e.error).unwrap_or(text);
        Err(ClientError::Api { status: status.as_u16(), message })
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        Self::decode(self.http.get(self.url(&["api", "health"])).send().await?).await
    }

    /// Runs a search. A 503 carrying fallback results is returned as a
    /// response with `semantic_unavailable` set.
    pub async fn search(&self, request: &SearchRequest, defer_suggestions: bool) -> Result<SearchResponse, ClientError> {
        let mut url = self.url(&["api", "search"]);
        if defer_suggestions {
            url.set_query(Some("defer_suggestions=true"));
        }
        let resp = self.http.post(url).json(request).send().await?;
        if resp.status() == StatusCode::SERVICE_UNAVAILABLE {
            let text = resp.text().await?;
            if let Ok(fallback) = serde_json::from_str::<SearchResponse>(&text) {
                return Ok(fallback);
            }
            let message = serde_json::from_str::<ErrorBody>(&text).map(|e| e.error).unwrap_or(text);
            return Err(ClientError::Api { status: 503, message });
        }
        Self::decode(resp).await
    }

    pub async fn suggestions(&self, digest: &str) -> Result<SuggestionsResponse, ClientError> {
        let req = self.http.get(self.url(&["api", "suggestions"])).query(&[("digest", digest)]);
        Self::decode(req.send().await?).await
    }

    pub async fn dataset(&self, id: &str, digest: Option<&str>) -> Result<DatasetDetail, ClientError> {
        let mut req = self.http.get(self.url(&["api", "datasets", id]));
        if let Some(d) = digest {
            req = req.query(&[("digest", d)]);
        }
        Self::decode(req.send().await?).await
    }

    pub async fn relevance(&self, id: &str, digest: &str) -> Result<RelevanceResponse, ClientError> {
        let req = self.http.get(self.url(&["api", "datasets", id, "relevance"])).query(&[("digest", digest)]);
        Self::decode(req.send().await?).await
    }

    pub async fn attribute_search(&self, q: &str, k: Option<usize>) -> Result<AttributeSearchResponse, ClientError> {
        let mut req = self.http.get(self.url(&["api", "attributes", "search"])).query(&[("q", q)]);
        if let Some(k) = k {
            req = req.query(&[("k", k)]);
        }
        Self::decode(req.send().await?).await
    }
}
