//! Proactive assistance grounded in the current results: query
//! reformulations, attribute concept filters, granularity suggestions and
//! per-dataset relevance indicators.

mod kmeans;
mod relevance;
mod state;

use std::collections::BTreeMap;

use futures::future::join_all;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::embedding::{cosine, EmbeddingVector};
use crate::granularity::{SpatialGranularity, TemporalGranularity};
use crate::llm::{bindings, LlmGateway, TemplateName};
use crate::search::{attribute_key, RankedResult, SearchQuery};
use crate::text::{content_tokens, most_frequent_token};

pub use kmeans::{kmeans, KMeansParams, KMeansResult};
pub use relevance::{generate_indicator, relevance_bindings, RelevanceCache, RelevanceIndicator, UNAVAILABLE};
pub use state::SearchState;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeRef {
    pub dataset_id: String,
    pub column_name: String,
}

impl AttributeRef {
    pub fn key(&self) -> String {
        attribute_key(&self.dataset_id, &self.column_name)
    }
}

/// A labelled group of semantically similar attributes. As a filter it keeps
/// datasets owning at least one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptFilter {
    pub label: String,
    pub member_attribute_ids: Vec<AttributeRef>,
    #[serde(default)]
    pub centroid: Option<EmbeddingVector>,
}

impl ConceptFilter {
    pub fn validate(&self) -> Result<(), String> {
        if self.label.trim().is_empty() {
            return Err("concept label is empty".into());
        }
        if self.member_attribute_ids.is_empty() {
            return Err(format!("concept {:?} has no members", self.label));
        }
        Ok(())
    }

    pub fn passes(&self, dataset_id: &str) -> bool {
        self.member_attribute_ids.iter().any(|m| m.dataset_id == dataset_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReformulationSuggestion {
    pub query: String,
    pub reason: String,
    pub matching_count: usize,
    /// Result datasets in the cluster behind this suggestion, in rank order.
    pub cluster_dataset_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GranularitySuggestions {
    pub temporal: Vec<TemporalGranularity>,
    pub spatial: Vec<SpatialGranularity>,
}

/// How a cluster is compared with the query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterRelevance {
    #[default]
    Centroid,
    MaxMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggestOptions {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub reformulations: usize,
    pub concepts: usize,
    pub granularity: usize,
    pub cluster_relevance: ClusterRelevance,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self {
            k: 15,
            max_iter: 50,
            seed: 7,
            reformulations: 3,
            concepts: 5,
            granularity: 3,
            cluster_relevance: ClusterRelevance::Centroid,
        }
    }
}

impl SuggestOptions {
    fn kmeans(&self) -> KMeansParams {
        KMeansParams { k: self.k, max_iter: self.max_iter, seed: self.seed }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestionBundle {
    pub reformulations: Vec<ReformulationSuggestion>,
    pub concepts: Vec<ConceptFilter>,
    pub granularity_suggestions: GranularitySuggestions,
    pub diagnostics: Vec<String>,
}

fn sim(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    cosine(a, b).unwrap_or(-1.0)
}

/// Clusters ordered by relevance to the query, best first, ties by index.
fn rank_clusters(result: &KMeansResult, vectors: &[&EmbeddingVector], query: &EmbeddingVector, mode: ClusterRelevance) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = (0..result.k_effective)
        .map(|c| {
            let s = match mode {
                ClusterRelevance::Centroid => sim(&result.centroids[c], query),
                ClusterRelevance::MaxMember => {
                    result.members(c).iter().map(|&i| sim(vectors[i], query)).fold(f64::NEG_INFINITY, f64::max)
                }
            };
            (c, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(c, _)| c).collect()
}

/// Clusters result purposes and asks for one reformulation per top cluster.
pub async fn suggest_reformulations(
    gateway: &LlmGateway,
    query: &SearchQuery,
    query_vector: &EmbeddingVector,
    results: &[RankedResult],
    catalog: &Catalog,
    options: &SuggestOptions,
) -> (Vec<ReformulationSuggestion>, Vec<String>) {
    let members: Vec<(&str, &str, &EmbeddingVector)> = results
        .iter()
        .filter_map(|r| catalog.get(&r.dataset_id))
        .filter(|d| d.is_semantic())
        .filter_map(|d| d.purpose_embedding.as_ref().map(|v| (d.id(), d.record.title.as_str(), v)))
        .collect();
    if members.is_empty() || options.reformulations == 0 {
        return (Vec::new(), Vec::new());
    }
    let vectors: Vec<&EmbeddingVector> = members.iter().map(|m| m.2).collect();
    let owned: Vec<EmbeddingVector> = vectors.iter().map(|v| (*v).clone()).collect();
    let clustering = kmeans(&owned, options.kmeans());
    let chosen: Vec<usize> = rank_clusters(&clustering, &vectors, query_vector, options.cluster_relevance)
        .into_iter()
        .take(options.reformulations)
        .collect();

    let calls = chosen.iter().map(|&c| {
        let idx = clustering.members(c);
        let titles: Vec<&str> = idx.iter().map(|&i| members[i].1).collect();
        let ids: Vec<String> = idx.iter().map(|&i| members[i].0.to_string()).collect();
        let b = bindings([("cluster", titles.join("; ")), ("query", query.text.clone())]);
        async move {
            #[derive(Deserialize)]
            struct Reply {
                query: String,
                reason: String,
            }
            let out = gateway.complete_structured::<Reply>(TemplateName::Reformulation, &b).await;
            (ids, out)
        }
    });
    let mut suggestions = Vec::new();
    let mut diagnostics = Vec::new();
    for (ids, out) in join_all(calls).await {
        match out {
            Ok(r) if !r.parsed.query.trim().is_empty() => suggestions.push(ReformulationSuggestion {
                query: r.parsed.query.trim().to_string(),
                reason: r.parsed.reason.trim().to_string(),
                matching_count: ids.len(),
                cluster_dataset_ids: ids,
            }),
            Ok(_) => diagnostics.push("reformulation: provider returned an empty query".into()),
            Err(e) => diagnostics.push(format!("reformulation unavailable: {e}")),
        }
    }
    (suggestions, diagnostics)
}

/// Lowercase alphanumeric words, at most two.
pub fn sanitize_label(raw: &str) -> String {
    let cleaned: String = raw.to_lowercase().chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    cleaned.split_whitespace().take(2).collect::<Vec<_>>().join(" ")
}

/// Clusters result attributes and labels the clusters closest to the query.
pub async fn suggest_concepts(
    gateway: &LlmGateway,
    query: &SearchQuery,
    query_vector: &EmbeddingVector,
    results: &[RankedResult],
    catalog: &Catalog,
    options: &SuggestOptions,
) -> (Vec<ConceptFilter>, Vec<String>) {
    let mut refs = Vec::new();
    let mut vectors: Vec<&EmbeddingVector> = Vec::new();
    for d in results.iter().filter_map(|r| catalog.get(&r.dataset_id)).filter(|d| d.is_semantic()) {
        for a in &d.attribute_embeddings {
            refs.push(AttributeRef { dataset_id: d.id().to_string(), column_name: a.column_name.clone() });
            vectors.push(&a.vector);
        }
    }
    if refs.is_empty() || options.concepts == 0 {
        return (Vec::new(), Vec::new());
    }
    let owned: Vec<EmbeddingVector> = vectors.iter().map(|v| (*v).clone()).collect();
    let clustering = kmeans(&owned, options.kmeans());
    let chosen: Vec<usize> = rank_clusters(&clustering, &vectors, query_vector, options.cluster_relevance)
        .into_iter()
        .take(options.concepts)
        .collect();

    let groups: Vec<Vec<String>> = chosen
        .iter()
        .map(|&c| {
            let mut names: Vec<String> = Vec::new();
            for i in clustering.members(c) {
                if !names.contains(&refs[i].column_name) {
                    names.push(refs[i].column_name.clone());
                }
            }
            names
        })
        .collect();
    let b = bindings([
        ("query", query.text.clone()),
        ("cluster", serde_json::to_string(&groups).expect("names serialize")),
    ]);
    let labels = match gateway.complete_structured::<Vec<String>>(TemplateName::ColumnConcepts, &b).await {
        Ok(r) => r.parsed,
        Err(e) => return (Vec::new(), vec![format!("concept suggestions unavailable: {e}")]),
    };
    let mut diagnostics = Vec::new();
    if labels.len() != groups.len() {
        diagnostics.push(format!("provider returned {} labels for {} clusters", labels.len(), groups.len()));
    }
    let mut concepts: Vec<ConceptFilter> = Vec::with_capacity(chosen.len());
    for (i, (&c, names)) in chosen.iter().zip(&groups).enumerate() {
        let mut label = labels.get(i).map(|l| sanitize_label(l)).unwrap_or_default();
        if label.is_empty() {
            label = most_frequent_token(names.iter().map(String::as_str))
                .map(|t| sanitize_label(&t))
                .unwrap_or_else(|| "attribute".into());
        }
        let used: Vec<&str> = concepts.iter().map(|c| c.label.as_str()).collect();
        let label = disambiguate(label, names, &used);
        let mut members: Vec<AttributeRef> = clustering.members(c).into_iter().map(|i| refs[i].clone()).collect();
        members.sort();
        concepts.push(ConceptFilter { label, member_attribute_ids: members, centroid: Some(clustering.centroids[c].clone()) });
    }
    (concepts, diagnostics)
}

/// Keeps concept labels distinct, qualifying a repeat with a token from the
/// cluster's column names (or a counter when none is left).
fn disambiguate(label: String, names: &[String], used: &[&str]) -> String {
    if !used.contains(&label.as_str()) {
        return label;
    }
    let head = label.split(' ').next().unwrap_or("attribute").to_string();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for tok in names.iter().flat_map(|n| content_tokens(n)) {
        if tok != head && tok.chars().all(|c| c.is_ascii_alphanumeric()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut tokens: Vec<(String, usize)> = counts.into_iter().collect();
    tokens.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    tokens
        .into_iter()
        .map(|(t, _)| format!("{head} {t}"))
        .chain((2..).map(|n| format!("{head} {n}")))
        .find(|c| !used.contains(&c.as_str()))
        .expect("unbounded candidates")
}

fn top_by_count<T: Ord + Copy>(counts: BTreeMap<T, usize>, n: usize, finer: impl Fn(T) -> usize) -> Vec<T> {
    let mut v: Vec<(T, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(finer(b.0).cmp(&finer(a.0))));
    v.into_iter().take(n).map(|(t, _)| t).collect()
}

/// Most frequent granularity tags across the results; ties favor the finer tag.
pub fn suggest_granularity(results: &[RankedResult], catalog: &Catalog, n: usize) -> GranularitySuggestions {
    let mut temporal = BTreeMap::new();
    let mut spatial = BTreeMap::new();
    for d in results.iter().filter_map(|r| catalog.get(&r.dataset_id)) {
        if let Some(t) = d.granularity.temporal {
            *temporal.entry(t).or_insert(0) += 1;
        }
        if let Some(s) = d.granularity.spatial {
            *spatial.entry(s).or_insert(0) += 1;
        }
    }
    GranularitySuggestions {
        temporal: top_by_count(temporal, n, TemporalGranularity::rank),
        spatial: top_by_count(spatial, n, SpatialGranularity::rank),
    }
}

/// Reformulations and concepts (run concurrently) plus granularity.
pub async fn suggest_all(
    gateway: &LlmGateway,
    query: &SearchQuery,
    results: &[RankedResult],
    catalog: &Catalog,
    options: &SuggestOptions,
) -> SuggestionBundle {
    let granularity_suggestions = suggest_granularity(results, catalog, options.granularity);
    if results.is_empty() {
        return SuggestionBundle { granularity_suggestions, ..Default::default() };
    }
    let query_vector = match gateway.embed_one(&query.text).await {
        Ok(v) => v,
        Err(e) => {
            return SuggestionBundle {
                granularity_suggestions,
                diagnostics: vec![format!("suggestions unavailable: {e}")],
                ..Default::default()
            }
        }
    };
    let ((reformulations, mut d1), (concepts, d2)) = futures::join!(
        suggest_reformulations(gateway, query, &query_vector, results, catalog, options),
        suggest_concepts(gateway, query, &query_vector, results, catalog, options),
    );
    d1.extend(d2);
    SuggestionBundle { reformulations, concepts, granularity_suggestions, diagnostics: d1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_labels_are_qualified() {
        let names = vec!["gdp_growth".to_string(), "gdp_per_capita".into(), "growth_rate".into()];
        assert_eq!(disambiguate("gdp".into(), &names, &["country"]), "gdp");
        assert_eq!(disambiguate("gdp".into(), &names, &["gdp"]), "gdp growth");
        assert_eq!(disambiguate("gdp".into(), &names, &["gdp", "gdp growth"]), "gdp capita");
        assert_eq!(disambiguate("gdp".into(), &["gdp".into()], &["gdp"]), "gdp 2");
    }

    #[test]
    fn labels_are_sanitized() {
        assert_eq!(sanitize_label("  Employee Hours Worked!"), "employee hours");
        assert_eq!(sanitize_label("Movie-Title"), "movie title");
        assert_eq!(sanitize_label("***"), "");
    }

    #[test]
    fn concept_filter_membership() {
        let c = ConceptFilter {
            label: "x".into(),
            member_attribute_ids: vec![AttributeRef { dataset_id: "a".into(), column_name: "c".into() }],
            centroid: None,
        };
        assert!(c.passes("a"));
        assert!(!c.passes("b"));
        assert!(c.validate().is_ok());
        assert!(ConceptFilter { member_attribute_ids: vec![], ..c.clone() }.validate().is_err());
        assert!(ConceptFilter { label: " ".into(), ..c }.validate().is_err());
    }

    #[test]
    fn granularity_ties_prefer_finer() {
        let mut counts = BTreeMap::new();
        counts.insert(TemporalGranularity::Year, 2);
        counts.insert(TemporalGranularity::Month, 2);
        counts.insert(TemporalGranularity::Day, 1);
        counts.insert(TemporalGranularity::Hour, 1);
        let top = top_by_count(counts, 3, TemporalGranularity::rank);
        assert_eq!(top, vec![TemporalGranularity::Month, TemporalGranularity::Year, TemporalGranularity::Hour]);
    }
}
