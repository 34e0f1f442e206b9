//! Service configuration: a TOML file plus environment overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assist::SuggestOptions;
use crate::enrich::EnrichOptions;
use crate::index::HnswParams;
use crate::llm::{ProviderConfig, ProviderKind};
use crate::search::RankOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub top_n: usize,
    pub candidate_multiplier: usize,
    /// Score every dataset exactly instead of using index candidates.
    pub exhaustive: bool,
    /// Nearest attributes consulted for an attribute filter.
    pub attribute_k: usize,
    /// Results whose relevance indicators are generated eagerly.
    pub eager_relevance: usize,
    pub relevance_cache_capacity: usize,
    pub session_capacity: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            top_n: 100,
            candidate_multiplier: 4,
            exhaustive: false,
            attribute_k: 50,
            eager_relevance: 5,
            relevance_cache_capacity: 10_000,
            session_capacity: 1024,
        }
    }
}

impl SearchConfig {
    pub fn rank_options(&self) -> RankOptions {
        RankOptions { top_n: self.top_n, candidate_multiplier: self.candidate_multiplier, exhaustive: self.exhaustive }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoutConfig {
    pub hnsw: HnswParams,
    pub search: SearchConfig,
    pub suggest: SuggestOptions,
    pub enrich: EnrichOptions,
    pub llm: ProviderConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ScoutConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise), then applies environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.check()?;
        Ok(cfg)
    }

    /// `SCOUT_MOCK=1` forces the mock provider; `SCOUT_LLM_PROVIDER`,
    /// `SCOUT_LLM_BASE_URL`, `SCOUT_LLM_MODEL` and `SCOUT_EMBEDDING_MODEL`
    /// override the provider section.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(kind) = get("SCOUT_LLM_PROVIDER") {
            match kind.trim().to_ascii_lowercase().as_str() {
                "mock" => self.llm.kind = ProviderKind::Mock,
                "openai" | "open_ai" => self.llm.kind = ProviderKind::OpenAi,
                other => tracing::warn!("ignoring unknown SCOUT_LLM_PROVIDER {other:?}"),
            }
        }
        if let Some(url) = get("SCOUT_LLM_BASE_URL") {
            self.llm.base_url = url;
        }
        if let Some(m) = get("SCOUT_LLM_MODEL") {
            self.llm.model_name = m;
        }
        if let Some(m) = get("SCOUT_EMBEDDING_MODEL") {
            self.llm.embedding_model_name = m;
        }
        if get("SCOUT_MOCK").is_some_and(|v| v == "1" || v.eq_ignore_ascii_case("true")) {
            self.llm.kind = ProviderKind::Mock;
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.hnsw.m < 2 {
            return bad("hnsw.m must be at least 2");
        }
        if self.hnsw.ef_construction == 0 || self.hnsw.ef_search == 0 {
            return bad("hnsw ef values must be positive");
        }
        if self.search.top_n == 0 {
            return bad("search.top_n must be positive");
        }
        if self.llm.embedding_dim == 0 {
            return bad("llm.embedding_dim must be positive");
        }
        if self.llm.max_in_flight == 0 {
            return bad("llm.max_in_flight must be positive");
        }
        if self.enrich.batch_size == 0 || self.enrich.concurrency == 0 {
            return bad("enrich batch_size and concurrency must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ScoutConfig::default();
        assert_eq!((c.hnsw.m, c.hnsw.ef_construction, c.hnsw.ef_search), (16, 64, 100));
        assert_eq!(c.search.top_n, 100);
        assert_eq!(c.search.eager_relevance, 5);
        assert_eq!(c.suggest.k, 15);
        assert_eq!(c.llm.max_retries, 2);
        assert_eq!(c.llm.kind, ProviderKind::Mock);
    }

    #[test]
    fn partial_toml() {
        let c = ScoutConfig::from_toml("[search]\ntop_n = 20\n[llm]\nkind = \"open_ai\"\nmodel_name = \"m\"\n").unwrap();
        assert_eq!(c.search.top_n, 20);
        assert_eq!(c.search.candidate_multiplier, 4);
        assert_eq!(c.llm.kind, ProviderKind::OpenAi);
        assert_eq!(c.llm.model_name, "m");
        assert!(ScoutConfig::from_toml("[search]\ntop_n = 0\n").is_err());
        assert!(ScoutConfig::from_toml("[search\n").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = ScoutConfig::default();
        c.apply_env(|k| match k {
            "SCOUT_LLM_PROVIDER" => Some("openai".into()),
            "SCOUT_LLM_BASE_URL" => Some("http://localhost:1".into()),
            _ => None,
        });
        assert_eq!(c.llm.kind, ProviderKind::OpenAi);
        assert_eq!(c.llm.base_url, "http://localhost:1");
        c.apply_env(|k| (k == "SCOUT_MOCK").then(|| "1".into()));
        assert_eq!(c.llm.kind, ProviderKind::Mock);
    }
}
