use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::search::{FilterSet, SearchQuery, TaskType};

/// A query plus its active filters, identified by a content digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub query: SearchQuery,
    pub filters: FilterSet,
    pub digest: String,
}

#[derive(Serialize)]
struct CanonicalConcept<'a> {
    label: &'a str,
    members: Vec<String>,
}

#[derive(Serialize)]
struct CanonicalState<'a> {
    query: &'a str,
    task_type: Option<TaskType>,
    title_contains: Option<String>,
    description_contains: Option<String>,
    tags_any: Vec<String>,
    rows: (Option<u64>, Option<u64>),
    cols: (Option<u64>, Option<u64>),
    max_size_bytes: Option<u64>,
    concepts: Vec<CanonicalConcept<'a>>,
    temporal: Option<&'static str>,
    spatial: Option<&'static str>,
    attribute_query: Option<String>,
}

fn norm_text(s: &Option<String>) -> Option<String> {
    s.as_deref().map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty())
}

fn canonical_json(query: &SearchQuery, f: &FilterSet) -> String {
    let mut tags: Vec<String> = f.exact.tags_any.iter().map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty()).collect();
    tags.sort();
    tags.dedup();
    let mut concepts: Vec<CanonicalConcept<'_>> = f
        .concepts
        .iter()
        .map(|c| {
            let mut members: Vec<String> = c.member_attribute_ids.iter().map(|m| m.key()).collect();
            members.sort();
            members.dedup();
            CanonicalConcept { label: &c.label, members }
        })
        .collect();
    concepts.sort_by(|a, b| (a.label, &a.members).cmp(&(b.label, &b.members)));
    let state = CanonicalState {
        query: query.text.trim(),
        task_type: query.task_type,
        title_contains: norm_text(&f.exact.title_contains),
        description_contains: norm_text(&f.exact.description_contains),
        tags_any: tags,
        rows: (f.exact.min_rows, f.exact.max_rows),
        cols: (f.exact.min_cols, f.exact.max_cols),
        max_size_bytes: f.exact.max_size_bytes,
        concepts,
        temporal: f.temporal.map(|t| t.label()),
        spatial: f.spatial.map(|s| s.label()),
        attribute_query: norm_text(&f.attribute_query),
    };
    serde_json::to_string(&state).expect("canonical state serializes")
}

impl SearchState {
    pub fn new(query: SearchQuery, filters: FilterSet) -> Self {
        let canonical = canonical_json(&query, &filters);
        let hash = Sha256::digest(canonical.as_bytes());
        let digest = hex::encode(&hash[..16]);
        Self { query, filters, digest }
    }

    /// Human-readable filter summary for prompts.
    pub fn filters_text(&self) -> String {
        let f = &self.filters;
        let mut parts = Vec::new();
        if let Some(t) = norm_text(&f.exact.title_contains) {
            parts.push(format!("title contains \"{t}\""));
        }
        if let Some(t) = norm_text(&f.exact.description_contains) {
            parts.push(format!("description contains \"{t}\""));
        }
        if !f.exact.tags_any.is_empty() {
            parts.push(format!("tags: {}", f.exact.tags_any.join(", ")));
        }
        let bound = |name: &str, lo: Option<u64>, hi: Option<u64>, parts: &mut Vec<String>| match (lo, hi) {
            (Some(l), Some(h)) => parts.push(format!("{name} between {l} and {h}")),
            (Some(l), None) => parts.push(format!("at least {l} {name}")),
            (None, Some(h)) => parts.push(format!("at most {h} {name}")),
            (None, None) => {}
        };
        bound("rows", f.exact.min_rows, f.exact.max_rows, &mut parts);
        bound("columns", f.exact.min_cols, f.exact.max_cols, &mut parts);
        if let Some(s) = f.exact.max_size_bytes {
            parts.push(format!("at most {s} bytes"));
        }
        for c in &f.concepts {
            parts.push(format!("concept: {}", c.label));
        }
        if let Some(t) = f.temporal {
            parts.push(format!("temporal granularity: {}", t.label()));
        }
        if let Some(s) = f.spatial {
            parts.push(format!("spatial granularity: {}", s.label()));
        }
        if let Some(q) = f.attribute_query() {
            parts.push(format!("has attribute like \"{q}\""));
        }
        if parts.is_empty() {
            "None".into()
        } else {
            parts.join("; ")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assist::{AttributeRef, ConceptFilter};
    use crate::granularity::TemporalGranularity;

    fn state(q: &str, f: FilterSet) -> SearchState {
        SearchState::new(SearchQuery::new(q, None).unwrap(), f)
    }

    #[test]
    fn digest_tracks_query_and_filters() {
        let base = state("housing prices", FilterSet::default());
        assert_eq!(base.digest.len(), 32);
        assert_eq!(base.digest, state("housing prices", FilterSet::default()).digest);
        assert_ne!(base.digest, state("housing price", FilterSet::default()).digest);
        let f = FilterSet { temporal: Some(TemporalGranularity::Year), ..Default::default() };
        assert_ne!(base.digest, state("housing prices", f).digest);
    }

    #[test]
    fn digest_ignores_presentation_details() {
        let mut a = FilterSet::default();
        a.exact.tags_any = vec!["Health".into(), "covid".into()];
        let mut b = FilterSet::default();
        b.exact.tags_any = vec!["covid".into(), "health".into(), "covid".into()];
        assert_eq!(state("q", a).digest, state("q", b).digest);

        let member = |d: &str| AttributeRef { dataset_id: d.into(), column_name: "x".into() };
        let concept = |m: Vec<AttributeRef>| FilterSet {
            concepts: vec![ConceptFilter { label: "x".into(), member_attribute_ids: m, centroid: None }],
            ..Default::default()
        };
        let a = concept(vec![member("1"), member("2")]);
        let b = concept(vec![member("2"), member("1")]);
        assert_eq!(state("q", a).digest, state("q", b).digest);
    }

    #[test]
    fn filter_text() {
        assert_eq!(state("q", FilterSet::default()).filters_text(), "None");
        let mut f = FilterSet::default();
        f.exact.min_rows = Some(100);
        f.temporal = Some(TemporalGranularity::Month);
        assert_eq!(state("q", f).filters_text(), "at least 100 rows; temporal granularity: Month");
    }
}
