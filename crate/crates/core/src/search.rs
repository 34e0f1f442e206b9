//! Online retrieval: hypothetical schemas, mean-cosine ranking and filters.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assist::ConceptFilter;
use crate::catalog::Catalog;
use crate::corpus::render_markdown;
use crate::embedding::{cosine, EmbeddingVector};
use crate::enrich::EnrichedDataset;
use crate::granularity::{SpatialGranularity, TemporalGranularity};
use crate::index::{HnswIndex, IndexError};
use crate::llm::{bindings, GatewayError, LlmGateway, TemplateName};

/// Hypothetical schemas generated per query.
pub const SCHEMA_COUNT: usize = 3;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid filters: {0}")]
    InvalidFilters(String),
    #[error("semantic search unavailable: {0}")]
    Unavailable(#[from] GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Regression,
    Classification,
    Visualization,
    TemporalAnalysis,
    Other,
}

impl TaskType {
    pub fn label(self) -> &'static str {
        match self {
            Self::Regression => "regression",
            Self::Classification => "classification",
            Self::Visualization => "visualization",
            Self::TemporalAnalysis => "temporal analysis",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    #[serde(default)]
    pub task_type: Option<TaskType>,
}

impl SearchQuery {
    pub fn new(text: impl Into<String>, task_type: Option<TaskType>) -> Result<Self, SearchError> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(SearchError::InvalidQuery("query text is empty".into()));
        }
        Ok(Self { text, task_type })
    }

    /// Text handed to schema generation; a selected task type is appended.
    pub fn prompt_text(&self) -> String {
        match self.task_type {
            Some(t) if t != TaskType::Other => format!("{} (task: {})", self.text, t.label()),
            _ => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypotheticalSchema {
    pub table_name: String,
    pub column_names: Vec<String>,
    pub data_types: Vec<String>,
    pub example_row: Vec<String>,
}

impl HypotheticalSchema {
    /// Forces the three lists to share the length of `column_names`.
    pub fn aligned(mut self) -> Self {
        let n = self.column_names.len();
        self.data_types.resize(n, "TEXT".into());
        self.example_row.resize(n, String::new());
        self
    }

    /// Same layout as the dataset embedding input: name, newline, markdown
    /// header and the example row.
    pub fn embedding_input(&self) -> String {
        if self.column_names.is_empty() {
            return self.table_name.clone();
        }
        let table = render_markdown(&self.column_names, std::slice::from_ref(&self.example_row));
        format!("{}\n{}", self.table_name, table)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactFilters {
    pub title_contains: Option<String>,
    pub description_contains: Option<String>,
    pub tags_any: Vec<String>,
    pub min_rows: Option<u64>,
    pub max_rows: Option<u64>,
    pub min_cols: Option<u64>,
    pub max_cols: Option<u64>,
    pub max_size_bytes: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSet {
    pub exact: ExactFilters,
    pub concepts: Vec<ConceptFilter>,
    pub temporal: Option<TemporalGranularity>,
    pub spatial: Option<SpatialGranularity>,
    pub attribute_query: Option<String>,
}

impl FilterSet {
    pub fn is_empty(&self) -> bool {
        self.exact == ExactFilters::default()
            && self.concepts.is_empty()
            && self.temporal.is_none()
            && self.spatial.is_none()
            && self.attribute_query.as_deref().is_none_or(|q| q.trim().is_empty())
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        for c in &self.concepts {
            c.validate().map_err(SearchError::InvalidFilters)?;
        }
        Ok(())
    }

    pub fn attribute_query(&self) -> Option<&str> {
        self.attribute_query.as_deref().map(str::trim).filter(|q| !q.is_empty())
    }
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.trim().to_lowercase())
}

impl ExactFilters {
    pub fn passes(&self, d: &EnrichedDataset) -> bool {
        let r = &d.record;
        if let Some(t) = &self.title_contains {
            if !contains_ci(&r.title, t) {
                return false;
            }
        }
        if let Some(t) = &self.description_contains {
            if !contains_ci(&r.description, t) && !contains_ci(d.summary(), t) {
                return false;
            }
        }
        if !self.tags_any.is_empty()
            && !self.tags_any.iter().any(|want| r.tags.iter().any(|have| have.eq_ignore_ascii_case(want.trim())))
        {
            return false;
        }
        let within = |v: u64, lo: Option<u64>, hi: Option<u64>| lo.is_none_or(|lo| v >= lo) && hi.is_none_or(|hi| v <= hi);
        within(r.num_rows, self.min_rows, self.max_rows)
            && within(r.num_cols, self.min_cols, self.max_cols)
            && within(r.size_bytes, None, self.max_size_bytes)
    }
}

/// Filters with the attribute query already resolved to a dataset set.
pub struct ResolvedFilters<'a> {
    pub filters: &'a FilterSet,
    pub attribute_hits: Option<HashSet<String>>,
}

impl ResolvedFilters<'_> {
    pub fn passes(&self, d: &EnrichedDataset) -> bool {
        let f = self.filters;
        f.exact.passes(d)
            && f.concepts.iter().all(|c| c.passes(d.id()))
            && f.temporal.is_none_or(|t| d.granularity.temporal == Some(t))
            && f.spatial.is_none_or(|s| d.granularity.spatial == Some(s))
            && self.attribute_hits.as_ref().is_none_or(|hits| hits.contains(d.id()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub dataset_id: String,
    pub aggregate_score: f64,
    pub per_schema_scores: Vec<f64>,
}

/// Keeps results whose dataset passes every active filter, in input order.
pub fn apply_filters(results: &[RankedResult], filters: &ResolvedFilters<'_>, catalog: &Catalog) -> Vec<RankedResult> {
    results
        .iter()
        .filter(|r| catalog.get(&r.dataset_id).is_some_and(|d| filters.passes(d)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct RankOptions {
    pub top_n: usize,
    /// Per-schema candidate depth is `candidate_multiplier * top_n`.
    pub candidate_multiplier: usize,
    /// Score every indexed dataset instead of the candidate union.
    pub exhaustive: bool,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self { top_n: 100, candidate_multiplier: 4, exhaustive: false }
    }
}

/// Asks the provider for three schemas. A wrong count is retried once, then
/// repaired by cycling (padding) or truncation with a diagnostic.
pub async fn generate_schemas(
    gateway: &LlmGateway,
    query: &SearchQuery,
) -> Result<(Vec<HypotheticalSchema>, Vec<String>), SearchError> {
    let b = bindings([("query", query.prompt_text())]);
    let mut diagnostics = Vec::new();
    let mut schemas: Vec<HypotheticalSchema> = Vec::new();
    for attempt in 0..2 {
        let out = gateway.complete_structured::<Vec<HypotheticalSchema>>(TemplateName::HypotheticalSchemas, &b).await?;
        schemas = out.parsed.into_iter().map(HypotheticalSchema::aligned).collect();
        if schemas.len() == SCHEMA_COUNT {
            return Ok((schemas, diagnostics));
        }
        diagnostics.push(format!("provider returned {} schemas (attempt {})", schemas.len(), attempt + 1));
    }
    if schemas.is_empty() {
        return Err(SearchError::Unavailable(GatewayError::SchemaViolation {
            raw: "[]".into(),
            detail: "provider returned no schemas".into(),
            attempts: 2,
        }));
    }
    let original = schemas.len();
    let mut i = 0;
    while schemas.len() < SCHEMA_COUNT {
        schemas.push(schemas[i % original].clone());
        i += 1;
    }
    schemas.truncate(SCHEMA_COUNT);
    diagnostics.push(format!("schema count repaired from {original} to {SCHEMA_COUNT}"));
    Ok((schemas, diagnostics))
}

pub async fn embed_schemas(gateway: &LlmGateway, schemas: &[HypotheticalSchema]) -> Result<Vec<EmbeddingVector>, SearchError> {
    let texts: Vec<String> = schemas.iter().map(HypotheticalSchema::embedding_input).collect();
    Ok(gateway.embed_texts(&texts).await?)
}

fn downloads_desc(a: Option<u64>, b: Option<u64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Aggregate descending, then downloads descending (absent last), then id.
pub fn result_order(catalog: &Catalog) -> impl Fn(&RankedResult, &RankedResult) -> Ordering + '_ {
    move |a, b| {
        b.aggregate_score
            .partial_cmp(&a.aggregate_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                let da = catalog.get(&a.dataset_id).and_then(|d| d.record.downloads);
                let db = catalog.get(&b.dataset_id).and_then(|d| d.record.downloads);
                downloads_desc(da, db)
            })
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    }
}

/// Scores one dataset against every schema embedding.
pub fn score_dataset(schema_vectors: &[EmbeddingVector], dataset: &EnrichedDataset) -> Option<RankedResult> {
    let emb = dataset.dataset_embedding.as_ref().filter(|_| dataset.is_semantic())?;
    let per_schema: Vec<f64> = schema_vectors.iter().map(|s| cosine(s, emb)).collect::<Result<_, _>>().ok()?;
    let aggregate = per_schema.iter().sum::<f64>() / per_schema.len() as f64;
    Some(RankedResult { dataset_id: dataset.id().to_string(), aggregate_score: aggregate, per_schema_scores: per_schema })
}

/// Candidate generation through the dataset index, then exact mean-cosine
/// rescoring of the candidate union.
pub fn score_and_rank(
    schema_vectors: &[EmbeddingVector],
    catalog: &Catalog,
    index: &HnswIndex,
    options: RankOptions,
) -> Result<Vec<RankedResult>, SearchError> {
    if index.is_empty() || schema_vectors.is_empty() {
        return Ok(Vec::new());
    }
    let depth = options.top_n.max(1).saturating_mul(options.candidate_multiplier.max(1));
    let candidates: BTreeSet<String> = if options.exhaustive || depth >= index.len() {
        index.ids().map(str::to_string).collect()
    } else {
        let mut set = BTreeSet::new();
        for v in schema_vectors {
            for n in index.knn(v, depth)? {
                set.insert(n.id);
            }
        }
        set
    };
    let mut results: Vec<RankedResult> = candidates
        .iter()
        .filter_map(|id| catalog.get(id))
        .filter_map(|d| score_dataset(schema_vectors, d))
        .collect();
    results.sort_by(result_order(catalog));
    results.truncate(options.top_n);
    Ok(results)
}

const ATTRIBUTE_SEP: char = '\u{1f}';

/// Attribute index key for one column of a dataset.
pub fn attribute_key(dataset_id: &str, column: &str) -> String {
    format!("{dataset_id}{ATTRIBUTE_SEP}{column}")
}

pub fn split_attribute_key(key: &str) -> Option<(&str, &str)> {
    key.split_once(ATTRIBUTE_SEP)
}

/// Dataset ids owning the `k` attributes nearest to `name`, best hit first.
pub async fn attribute_search(
    gateway: &LlmGateway,
    attr_index: &HnswIndex,
    name: &str,
    k: usize,
) -> Result<Vec<String>, SearchError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(SearchError::InvalidQuery("attribute query is empty".into()));
    }
    if attr_index.is_empty() {
        return Ok(Vec::new());
    }
    let q = gateway.embed_one(name).await?;
    let hits = attr_index.knn(&q, k.max(1))?;
    let mut seen = HashSet::new();
    Ok(hits
        .into_iter()
        .filter_map(|h| split_attribute_key(&h.id).map(|(d, _)| d.to_string()))
        .filter(|d| seen.insert(d.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::testing::ScriptedProvider;
    use crate::llm::ProviderConfig;
    use std::sync::Arc;

    #[test]
    fn query_validation() {
        assert!(SearchQuery::new("  ", None).is_err());
        let q = SearchQuery::new(" housing ", Some(TaskType::TemporalAnalysis)).unwrap();
        assert_eq!(q.text, "housing");
        assert_eq!(q.prompt_text(), "housing (task: temporal analysis)");
        assert_eq!(SearchQuery::new("x", Some(TaskType::Other)).unwrap().prompt_text(), "x");
    }

    #[test]
    fn schema_alignment_and_input() {
        let s = HypotheticalSchema {
            table_name: "T".into(),
            column_names: vec!["a".into(), "b".into()],
            data_types: vec!["INT".into()],
            example_row: vec!["1".into(), "2".into(), "3".into()],
        }
        .aligned();
        assert_eq!(s.data_types, vec!["INT", "TEXT"]);
        assert_eq!(s.example_row, vec!["1", "2"]);
        assert_eq!(s.embedding_input(), "T\n| a | b |\n| --- | --- |\n| 1 | 2 |");
    }

    fn schema_json(n: usize) -> String {
        let one = r#"{"table_name":"T","column_names":["a"],"data_types":["INT"],"example_row":[1]}"#;
        format!("[{}]", vec![one; n].join(","))
    }

    #[tokio::test]
    async fn two_schemas_are_retried_then_padded() {
        let provider = Arc::new(ScriptedProvider::new([Ok(schema_json(2)), Ok(schema_json(2))]));
        let gw = LlmGateway::new(provider.clone(), ProviderConfig::mock());
        let (schemas, diags) = generate_schemas(&gw, &SearchQuery::new("q", None).unwrap()).await.unwrap();
        assert_eq!(schemas.len(), 3);
        assert_eq!(provider.prompts().len(), 2);
        assert!(diags.iter().any(|d| d.contains("repaired")));
        assert_eq!(schemas[0].example_row, vec!["1"]);
    }

    #[tokio::test]
    async fn retry_can_fix_the_count() {
        let provider = Arc::new(ScriptedProvider::new([Ok(schema_json(4)), Ok(schema_json(3))]));
        let gw = LlmGateway::new(provider, ProviderConfig::mock());
        let (schemas, diags) = generate_schemas(&gw, &SearchQuery::new("q", None).unwrap()).await.unwrap();
        assert_eq!(schemas.len(), 3);
        assert_eq!(diags.len(), 1);
    }

    #[tokio::test]
    async fn mock_always_gives_three() {
        let gw = LlmGateway::mock();
        for q in ["a", "remote work stress during the pandemic", "x y z w v u"] {
            let (s, d) = generate_schemas(&gw, &SearchQuery::new(q, None).unwrap()).await.unwrap();
            assert_eq!(s.len(), 3);
            assert!(d.is_empty());
        }
    }

    #[test]
    fn attribute_keys_split() {
        let k = attribute_key("ds-1", "movie name");
        assert_eq!(split_attribute_key(&k), Some(("ds-1", "movie name")));
    }

    #[test]
    fn mean_of_per_schema_scores() {
        let r = RankedResult { dataset_id: "x".into(), aggregate_score: 0.4, per_schema_scores: vec![0.2, 0.4, 0.6] };
        let mean = r.per_schema_scores.iter().sum::<f64>() / 3.0;
        assert!((mean - r.aggregate_score).abs() < 1e-9);
    }

    #[test]
    fn downloads_tiebreak_puts_absent_last() {
        assert_eq!(downloads_desc(Some(5), Some(3)), Ordering::Less);
        assert_eq!(downloads_desc(None, Some(0)), Ordering::Greater);
        assert_eq!(downloads_desc(None, None), Ordering::Equal);
    }
}
