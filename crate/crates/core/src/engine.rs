//! Online orchestration: search sessions, suggestions and relevance.

use std::collections::HashSet;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::{Arc, Mutex};

use futures::future::join_all;
use lru::LruCache;
use thiserror::Error;
use tokio::sync::OnceCell;

use crate::api::{DatasetDetail, ResultCard, SearchRequest, SearchResponse, SuggestionsResponse};
use crate::assist::{generate_indicator, suggest_all, suggest_granularity, RelevanceCache, RelevanceIndicator, SearchState, SuggestionBundle};
use crate::catalog::{self, Catalog, CatalogError};
use crate::config::ScoutConfig;
use crate::corpus::{make_preview, RawDatasetRecord};
use crate::enrich::{EnrichOptions, Enricher, PREVIEW_ROWS};
use crate::index::{self, HnswIndex, HnswParams, IndexBundle, IndexError};
use crate::llm::{GatewayError, LlmGateway};
use crate::search::{
    self, apply_filters, attribute_key, embed_schemas, generate_schemas, score_and_rank, RankedResult, ResolvedFilters,
    SearchError, SearchQuery,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Unavailable(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<SearchError> for EngineError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidQuery(m) | SearchError::InvalidFilters(m) => Self::BadRequest(m),
            SearchError::Unavailable(g) => Self::Unavailable(g.to_string()),
            SearchError::Index(i) => Self::Index(i),
        }
    }
}

/// Dataset and attribute indexes over the semantic part of a catalog.
pub fn build_indexes(catalog: &Catalog, params: HnswParams) -> Result<IndexBundle, IndexError> {
    let mut datasets = HnswIndex::new(catalog.embedding_dim, params)?;
    let mut attributes = HnswIndex::new(catalog.embedding_dim, params)?;
    for d in catalog.semantic() {
        if let Some(v) = &d.dataset_embedding {
            datasets.insert(d.id(), v)?;
        }
        for a in &d.attribute_embeddings {
            attributes.insert(attribute_key(d.id(), &a.column_name), &a.vector)?;
        }
    }
    Ok(IndexBundle { datasets, attributes })
}

/// Enriches `records` into a fresh catalog.
pub async fn enrich_catalog(
    records: Vec<RawDatasetRecord>,
    gateway: Arc<LlmGateway>,
    options: EnrichOptions,
) -> Catalog {
    let dim = gateway.embedding_dim();
    let mut catalog = Catalog::new(dim);
    catalog.provenance.provider = Some(gateway.describe());
    catalog.provenance.model = Some(gateway.config().model_name.clone());
    catalog.provenance.embedding_model = Some(gateway.config().embedding_model_name.clone());
    let report = Enricher::new(gateway, options).run(records, None).await.expect("no journal, no i/o");
    for d in report.datasets {
        catalog.upsert(d);
    }
    catalog
}

struct Session {
    state: SearchState,
    results: Vec<RankedResult>,
    semantic: bool,
    suggestions: OnceCell<SuggestionBundle>,
}

pub struct Engine {
    catalog: Arc<Catalog>,
    indexes: IndexBundle,
    gateway: Arc<LlmGateway>,
    config: ScoutConfig,
    relevance: RelevanceCache,
    sessions: Mutex<LruCache<String, Arc<Session>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("datasets", &self.catalog.len()).finish()
    }
}

/// Outcome of a search: the response plus datasets to prefetch indicators for.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub response: SearchResponse,
    pub eager_relevance: Vec<String>,
}

impl Engine {
    pub fn new(
        catalog: Catalog,
        indexes: IndexBundle,
        gateway: Arc<LlmGateway>,
        config: ScoutConfig,
        relevance: RelevanceCache,
    ) -> Result<Self, EngineError> {
        for (idx, what) in [(&indexes.datasets, "dataset"), (&indexes.attributes, "attribute")] {
            if !idx.is_empty() && idx.dim() != catalog.embedding_dim {
                return Err(EngineError::BadRequest(format!(
                    "{what} index dimension {} does not match catalog dimension {}",
                    idx.dim(),
                    catalog.embedding_dim
                )));
            }
        }
        if let Some(missing) = indexes.datasets.ids().find(|id| catalog.get(id).is_none()) {
            return Err(EngineError::BadRequest(format!("index references unknown dataset {missing:?}; rebuild the index")));
        }
        if gateway.embedding_dim() != catalog.embedding_dim {
            return Err(EngineError::BadRequest(format!(
                "provider embedding dimension {} does not match catalog dimension {}",
                gateway.embedding_dim(),
                catalog.embedding_dim
            )));
        }
        let cap = NonZeroUsize::new(config.search.session_capacity.max(1)).expect("nonzero");
        Ok(Self {
            catalog: Arc::new(catalog),
            indexes,
            gateway,
            config,
            relevance,
            sessions: Mutex::new(LruCache::new(cap)),
        })
    }

    /// Enriches and indexes `records` in memory.
    pub async fn from_records(
        records: Vec<RawDatasetRecord>,
        gateway: Arc<LlmGateway>,
        config: ScoutConfig,
    ) -> Result<Self, EngineError> {
        let catalog = enrich_catalog(records, gateway.clone(), config.enrich).await;
        let indexes = build_indexes(&catalog, config.hnsw)?;
        let relevance = RelevanceCache::in_memory(config.search.relevance_cache_capacity);
        Self::new(catalog, indexes, gateway, config, relevance)
    }

    /// Loads a catalog snapshot and index bundle and builds the provider from
    /// `config`. Relevance indicators spill next to the catalog.
    pub fn open(catalog_path: &Path, index_path: &Path, config: ScoutConfig) -> Result<Self, EngineError> {
        let catalog = catalog::load(catalog_path)?;
        let indexes = index::read_bundle(index_path)?;
        let gateway = Arc::new(LlmGateway::from_config(config.llm.clone())?);
        let relevance = RelevanceCache::persistent(
            config.search.relevance_cache_capacity,
            RelevanceCache::overflow_path_for(catalog_path),
        )
        .map_err(CatalogError::Io)?;
        Self::new(catalog, indexes, gateway, config, relevance)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn gateway(&self) -> &LlmGateway {
        &self.gateway
    }

    pub fn config(&self) -> &ScoutConfig {
        &self.config
    }

    pub fn relevance_cache(&self) -> &RelevanceCache {
        &self.relevance
    }

    fn card(&self, r: &RankedResult) -> Option<ResultCard> {
        let d = self.catalog.get(&r.dataset_id)?;
        Some(ResultCard {
            dataset_id: r.dataset_id.clone(),
            title: d.record.title.clone(),
            summary: d.summary().to_string(),
            score: r.aggregate_score,
            per_schema_scores: r.per_schema_scores.clone(),
            granularity: d.granularity,
            tags: d.record.tags.clone(),
            num_rows: d.record.num_rows,
            num_cols: d.record.num_cols,
            size_bytes: d.record.size_bytes,
            downloads: d.record.downloads,
        })
    }

    fn session(&self, digest: &str) -> Result<Arc<Session>, EngineError> {
        self.sessions
            .lock()
            .unwrap()
            .get(digest)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("unknown search state {digest:?}")))
    }

    /// Datasets passing the exact filters, by downloads then id.
    fn fallback_results(&self, filters: &ResolvedFilters<'_>) -> Vec<RankedResult> {
        let mut all: Vec<RankedResult> = self
            .catalog
            .datasets
            .values()
            .filter(|d| filters.passes(d))
            .map(|d| RankedResult { dataset_id: d.id().to_string(), aggregate_score: 0.0, per_schema_scores: Vec::new() })
            .collect();
        all.sort_by(search::result_order(&self.catalog));
        all.truncate(self.config.search.top_n);
        all
    }

    async fn semantic_results(
        &self,
        query: &SearchQuery,
        filters: &ResolvedFilters<'_>,
        diagnostics: &mut Vec<String>,
    ) -> Result<(Vec<RankedResult>, Vec<search::HypotheticalSchema>), SearchError> {
        let (schemas, diags) = generate_schemas(&self.gateway, query).await?;
        diagnostics.extend(diags);
        let vectors = embed_schemas(&self.gateway, &schemas).await?;
        let ranked = score_and_rank(&vectors, &self.catalog, &self.indexes.datasets, self.config.search.rank_options())?;
        Ok((apply_filters(&ranked, filters, &self.catalog), schemas))
    }

    pub async fn search(&self, request: &SearchRequest, defer_suggestions: bool) -> Result<SearchOutcome, EngineError> {
        let query = SearchQuery::new(request.query.clone(), request.task_type)?;
        request.filters.validate()?;
        let state = SearchState::new(query.clone(), request.filters.clone());
        let mut diagnostics = Vec::new();

        let mut semantic = true;
        let attribute_hits = match request.filters.attribute_query() {
            None => None,
            Some(q) => match self.attribute_datasets(q, None).await {
                Ok(ids) => Some(ids.into_iter().collect::<HashSet<_>>()),
                Err(EngineError::Unavailable(m)) => {
                    semantic = false;
                    diagnostics.push(format!("attribute filter unavailable: {m}"));
                    None
                }
                Err(e) => return Err(e),
            },
        };
        let resolved = ResolvedFilters { filters: &request.filters, attribute_hits };

        let mut schemas = Vec::new();
        let results = if semantic {
            match self.semantic_results(&query, &resolved, &mut diagnostics).await {
                Ok((r, s)) => {
                    schemas = s;
                    r
                }
                Err(SearchError::Unavailable(e)) => {
                    semantic = false;
                    diagnostics.push(format!("semantic search unavailable: {e}"));
                    self.fallback_results(&resolved)
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            self.fallback_results(&resolved)
        };

        let session = {
            let mut sessions = self.sessions.lock().unwrap();
            let fresh = Arc::new(Session { state: state.clone(), results: results.clone(), semantic, suggestions: OnceCell::new() });
            // A repeated state keeps its computed suggestions.
            let session = match sessions.get(&state.digest) {
                Some(old) if old.results == results && old.semantic == semantic => old.clone(),
                _ => fresh,
            };
            sessions.put(state.digest.clone(), session.clone());
            session
        };

        let bundle = if defer_suggestions {
            None
        } else {
            Some(self.bundle_for(&session).await)
        };
        let cards = results.iter().filter_map(|r| self.card(r)).collect();
        let eager_relevance = if semantic {
            results.iter().take(self.config.search.eager_relevance).map(|r| r.dataset_id.clone()).collect()
        } else {
            Vec::new()
        };
        let pending = bundle.is_none();
        let bundle = bundle.unwrap_or_default();
        diagnostics.extend(bundle.diagnostics.iter().cloned());
        Ok(SearchOutcome {
            response: SearchResponse {
                state_digest: state.digest,
                results: cards,
                hypothetical_schemas: schemas,
                reformulations: bundle.reformulations,
                concepts: bundle.concepts,
                granularity_suggestions: bundle.granularity_suggestions,
                suggestions_pending: pending,
                semantic_unavailable: !semantic,
                diagnostics,
            },
            eager_relevance,
        })
    }

    async fn bundle_for(&self, session: &Session) -> SuggestionBundle {
        session
            .suggestions
            .get_or_init(|| async {
                if session.semantic {
                    suggest_all(&self.gateway, &session.state.query, &session.results, &self.catalog, &self.config.suggest).await
                } else {
                    SuggestionBundle {
                        granularity_suggestions: suggest_granularity(
                            &session.results,
                            &self.catalog,
                            self.config.suggest.granularity,
                        ),
                        ..Default::default()
                    }
                }
            })
            .await
            .clone()
    }

    /// Suggestions for a previously issued search.
    pub async fn suggestions(&self, digest: &str) -> Result<SuggestionsResponse, EngineError> {
        let session = self.session(digest)?;
        let bundle = self.bundle_for(&session).await;
        Ok(SuggestionsResponse { state_digest: digest.to_string(), bundle })
    }

    /// Relevance indicators for `dataset_id` as a result of search `digest`.
    pub async fn relevance(&self, digest: &str, dataset_id: &str) -> Result<RelevanceIndicator, EngineError> {
        let session = self.session(digest)?;
        if !session.results.iter().any(|r| r.dataset_id == dataset_id) {
            return Err(EngineError::NotFound(format!("dataset {dataset_id:?} is not a result of state {digest:?}")));
        }
        let dataset = self
            .catalog
            .get(dataset_id)
            .ok_or_else(|| EngineError::NotFound(format!("unknown dataset {dataset_id:?}")))?;
        let gateway = &self.gateway;
        let state = &session.state;
        Ok(self.relevance.get_or_generate(digest, dataset_id, || generate_indicator(gateway, state, dataset)).await)
    }

    /// Generates indicators for `ids` concurrently.
    pub async fn prefetch_relevance(&self, digest: &str, ids: &[String]) {
        let tasks = ids.iter().map(|id| self.relevance(digest, id));
        for r in join_all(tasks).await {
            if let Err(e) = r {
                tracing::warn!("relevance prefetch: {e}");
            }
        }
    }

    pub fn dataset_detail(&self, id: &str, digest: Option<&str>) -> Result<DatasetDetail, EngineError> {
        let d = self.catalog.get(id).ok_or_else(|| EngineError::NotFound(format!("unknown dataset {id:?}")))?;
        let aug = d.augmented.as_ref();
        Ok(DatasetDetail {
            dataset_id: d.id().to_string(),
            title: d.record.title.clone(),
            filename: d.record.filename.clone(),
            description: d.record.description.clone(),
            summary: d.summary().to_string(),
            tags: d.record.tags.clone(),
            size_bytes: d.record.size_bytes,
            num_rows: d.record.num_rows,
            num_cols: d.record.num_cols,
            usability_score: d.record.usability_score,
            downloads: d.record.downloads,
            purposes: aug.map(|a| a.dataset_purposes.clone()).unwrap_or_default(),
            sources: aug.map(|a| a.dataset_sources.clone()).unwrap_or_else(|| "N/A".into()),
            column_descriptions: aug.map(|a| a.column_descriptions.clone()).unwrap_or_default(),
            granularity: d.granularity,
            status: d.status.clone(),
            preview: make_preview(&d.record, PREVIEW_ROWS),
            provenance: self.catalog.provenance.clone(),
            relevance: digest.and_then(|g| self.relevance.peek(g, id)),
        })
    }

    /// Datasets owning the attributes nearest to `name`.
    pub async fn attribute_datasets(&self, name: &str, k: Option<usize>) -> Result<Vec<String>, EngineError> {
        let k = k.unwrap_or(self.config.search.attribute_k);
        Ok(search::attribute_search(&self.gateway, &self.indexes.attributes, name, k).await?)
    }

    /// Spills generated indicators to disk.
    pub fn persist(&self) -> std::io::Result<()> {
        self.relevance.persist_all()
    }
}
