//! JSON wire types shared by the service, its client and the CLI.

use serde::{Deserialize, Serialize};

use crate::assist::{ConceptFilter, GranularitySuggestions, ReformulationSuggestion, RelevanceIndicator, SuggestionBundle};
use crate::catalog::Provenance;
use crate::corpus::PreviewTable;
use crate::enrich::{ColumnDescription, EnrichStatus};
use crate::granularity::GranularityTags;
use crate::search::{FilterSet, HypotheticalSchema, TaskType};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub task_type: Option<TaskType>,
    #[serde(default)]
    pub filters: FilterSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCard {
    pub dataset_id: String,
    pub title: String,
    pub summary: String,
    pub score: f64,
    pub per_schema_scores: Vec<f64>,
    pub granularity: GranularityTags,
    pub tags: Vec<String>,
    pub num_rows: u64,
    pub num_cols: u64,
    pub size_bytes: u64,
    pub downloads: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub state_digest: String,
    pub results: Vec<ResultCard>,
    pub hypothetical_schemas: Vec<HypotheticalSchema>,
    pub reformulations: Vec<ReformulationSuggestion>,
    pub concepts: Vec<ConceptFilter>,
    pub granularity_suggestions: GranularitySuggestions,
    /// Suggestions were deferred; fetch them from the suggestions endpoint.
    pub suggestions_pending: bool,
    /// The provider failed; results come from exact filters only.
    pub semantic_unavailable: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionsResponse {
    pub state_digest: String,
    #[serde(flatten)]
    pub bundle: SuggestionBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDetail {
    pub dataset_id: String,
    pub title: String,
    pub filename: String,
    pub description: String,
    pub summary: String,
    pub tags: Vec<String>,
    pub size_bytes: u64,
    pub num_rows: u64,
    pub num_cols: u64,
    pub usability_score: Option<f64>,
    pub downloads: Option<u64>,
    pub purposes: Vec<String>,
    pub sources: String,
    pub column_descriptions: Vec<ColumnDescription>,
    pub granularity: GranularityTags,
    pub status: EnrichStatus,
    pub preview: PreviewTable,
    pub provenance: Provenance,
    /// Present when the request named a search state that has indicators.
    pub relevance: Option<RelevanceIndicator>,
}

pub type RelevanceResponse = RelevanceIndicator;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSearchResponse {
    pub query: String,
    pub dataset_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub datasets: usize,
    pub semantic_datasets: usize,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
