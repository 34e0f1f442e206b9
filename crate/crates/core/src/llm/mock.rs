//! Deterministic, rule-based provider used for tests and offline runs.
//!
//! Completions are computed from the request bindings (not the prompt text)
//! so that downstream algorithms can be checked against exact expectations.
//! Embeddings hash character trigrams and whole tokens into signed buckets
//! and L2-normalize the result.

use std::collections::BTreeSet;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{CompletionRequest, Provider, ProviderError, TemplateName};
use crate::corpus::parse_markdown;
use crate::granularity::{SpatialGranularity, TemporalGranularity};
use crate::text::{content_tokens, most_frequent_token, tokenize};

#[derive(Debug, Clone)]
pub struct MockProvider {
    dim: usize,
    seed: u64,
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new(512, 0x5c007)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl MockProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn features(text: &str) -> Vec<String> {
        let tokens = tokenize(text);
        let mut out = Vec::new();
        if tokens.is_empty() {
            let chars: Vec<char> = text.trim().to_lowercase().chars().collect();
            for w in chars.windows(3.min(chars.len()).max(1)) {
                out.push(w.iter().collect());
            }
            return out;
        }
        for tok in tokens {
            let padded: Vec<char> = format!("#{tok}#").chars().collect();
            for w in padded.windows(3) {
                out.push(w.iter().collect());
            }
            out.push(format!("w:{tok}"));
        }
        out
    }

    pub fn embed_text(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0f64; self.dim];
        for f in Self::features(text) {
            let h = fnv1a(self.seed, f.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        // Repeated features count sublinearly.
        for a in acc.iter_mut() {
            *a = a.signum() * a.abs().sqrt();
        }
        let mut norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let h = fnv1a(self.seed, text.as_bytes());
            acc[(h % self.dim as u64) as usize] = 1.0;
            norm = 1.0;
        }
        acc.into_iter().map(|x| (x / norm) as f32).collect()
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn describe(&self) -> String {
        format!("mock(dim={})", self.dim)
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let b = |k: &str| request.bindings.get(k).map(String::as_str).unwrap_or("");
        let value = match request.template {
            TemplateName::MetadataAugmentation => augment(b("title"), b("description"), b("example_rows")),
            TemplateName::GranularityAnnotation => granularity(b("example_rows")),
            TemplateName::HypotheticalSchemas => schemas(b("query")),
            TemplateName::Reformulation => reformulation(b("cluster"), b("query")),
            TemplateName::ColumnConcepts => concepts(b("cluster")),
            TemplateName::RelevanceIndicators => relevance(&request.bindings),
        };
        Ok(value.to_string())
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

const CATEGORICAL: &[&str] = &[
    "category", "class", "diagnosis", "gender", "genre", "label", "outcome", "sentiment", "species", "status",
    "target", "type",
];

fn infer_type(values: &[&str]) -> &'static str {
    let vals: Vec<&str> = values.iter().copied().filter(|v| !v.trim().is_empty()).collect();
    if vals.is_empty() {
        return "TEXT";
    }
    if vals.iter().all(|v| v.trim().parse::<i64>().is_ok()) {
        "INT"
    } else if vals.iter().all(|v| v.trim().parse::<f64>().is_ok()) {
        "FLOAT"
    } else if vals.iter().all(|v| looks_like_date(v.trim())) {
        "DATE"
    } else if vals.iter().all(|v| matches!(v.trim().to_ascii_lowercase().as_str(), "true" | "false")) {
        "BOOLEAN"
    } else {
        "TEXT"
    }
}

fn looks_like_date(v: &str) -> bool {
    let b = v.as_bytes();
    b.len() >= 10
        && b[..4].iter().all(u8::is_ascii_digit)
        && (b[4] == b'-' || b[4] == b'/')
        && b[5..7].iter().all(u8::is_ascii_digit)
        && b[7] == b[4]
        && b[8..10].iter().all(u8::is_ascii_digit)
}

fn temporal_keyword(token: &str) -> Option<TemporalGranularity> {
    use TemporalGranularity::*;
    Some(match token {
        "second" => Second,
        "minute" => Minute,
        "hour" | "time" | "timestamp" => Hour,
        "date" | "day" => Day,
        "week" => Week,
        "month" => Month,
        "quarter" => Quarter,
        "year" | "season" => Year,
        _ => return None,
    })
}

fn spatial_keyword(token: &str) -> Option<SpatialGranularity> {
    use SpatialGranularity::*;
    Some(match token {
        "latitude" | "lat" | "longitude" | "lon" | "lng" => LatLon,
        "residence" | "home" => ResidentialAddress,
        "address" | "street" => StreetAddress,
        "zip" | "zipcode" | "postal" | "postcode" => ZipCode,
        "neighborhood" | "neighbourhood" | "borough" => NeighborhoodRegion,
        "city" | "town" => City,
        "county" | "district" => CountyDistrict,
        "state" | "province" => StateProvince,
        "country" | "nation" => Country,
        "continent" => Continent,
        _ => return None,
    })
}

fn columns_of(example_rows: &str) -> (Vec<String>, Vec<Vec<String>>) {
    parse_markdown(example_rows)
}

fn augment(title: &str, description: &str, example_rows: &str) -> Value {
    let (header, rows) = columns_of(example_rows);
    let summary = first_sentence(description)
        .unwrap_or_else(|| format!("Table \"{}\" with {} columns.", title.trim(), header.len()));

    let mut numeric = 0;
    let mut categorical = false;
    let mut temporal = false;
    let mut column_descriptions = Vec::new();
    for (i, name) in header.iter().enumerate() {
        let values: Vec<&str> = rows.iter().filter_map(|r| r.get(i)).map(String::as_str).collect();
        let ty = infer_type(&values);
        let tokens = tokenize(name);
        if ty == "INT" || ty == "FLOAT" {
            numeric += 1;
        }
        if tokens.iter().any(|t| CATEGORICAL.contains(&t.as_str())) {
            categorical = true;
        }
        if ty == "DATE" || tokens.iter().any(|t| temporal_keyword(t).is_some()) {
            temporal = true;
        }
        column_descriptions.push(json!({
            "column_name": name,
            "type": ty,
            "description": format!("Values of {}.", tokens.join(" ")),
        }));
    }
    let mut purposes = Vec::new();
    if numeric >= 2 {
        purposes.push("regression");
    }
    if categorical {
        purposes.push("classification");
    }
    if temporal {
        purposes.push("temporal analysis");
    }
    if !header.is_empty() {
        purposes.push("visualization");
    }
    json!({
        "description_summary": summary,
        "dataset_purposes": purposes,
        "dataset_sources": source_of(description),
        "column_descriptions": column_descriptions,
    })
}

fn first_sentence(text: &str) -> Option<String> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let end = text.find(". ").map(|i| i + 1).unwrap_or(text.len());
    let mut s = text[..end].trim().to_string();
    if !s.ends_with('.') {
        s.push('.');
    }
    Some(s)
}

fn source_of(description: &str) -> String {
    if let Some(url) = description.split_whitespace().find(|w| w.starts_with("http://") || w.starts_with("https://")) {
        return url.trim_end_matches(['.', ',', ')']).to_string();
    }
    if let Some(pos) = description.find("Source:") {
        let rest = description[pos + "Source:".len()..].trim();
        let end = rest.find('.').unwrap_or(rest.len());
        let s = rest[..end].trim();
        if !s.is_empty() {
            return s.to_string();
        }
    }
    "N/A".into()
}

fn granularity(example_rows: &str) -> Value {
    let (header, _) = columns_of(example_rows);
    let mut temporal: Option<TemporalGranularity> = None;
    let mut spatial: Option<SpatialGranularity> = None;
    for tok in header.iter().flat_map(|h| tokenize(h)) {
        if let Some(t) = temporal_keyword(&tok) {
            temporal = Some(temporal.map_or(t, |cur| cur.max(t)));
        }
        if let Some(s) = spatial_keyword(&tok) {
            spatial = Some(spatial.map_or(s, |cur| cur.max(s)));
        }
    }
    json!({
        "temporal_granularity": temporal.map(|t| t.label()).unwrap_or(""),
        "spatial_granularity": spatial.map(|s| s.label()).unwrap_or(""),
    })
}

fn camel(tokens: &[String]) -> String {
    tokens
        .iter()
        .map(|t| {
            let mut c = t.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect::<String>(),
                None => String::new(),
            }
        })
        .collect()
}

fn schemas(query: &str) -> Value {
    let mut keywords: Vec<String> = Vec::new();
    for t in content_tokens(query) {
        if !keywords.contains(&t) && keywords.len() < 4 {
            keywords.push(t);
        }
    }
    if keywords.is_empty() {
        keywords.push("records".into());
    }
    let head: Vec<String> = keywords.iter().take(2).cloned().collect();
    let kw_types = vec!["TEXT"; keywords.len()];
    let kw_examples: Vec<String> = keywords.iter().map(|k| format!("{k} sample")).collect();

    let scaffold = |name: String, pre: &[(&str, &str, &str)], post: &[(&str, &str, &str)]| {
        let mut cols: Vec<String> = pre.iter().map(|c| c.0.to_string()).collect();
        let mut types: Vec<String> = pre.iter().map(|c| c.1.to_string()).collect();
        let mut row: Vec<String> = pre.iter().map(|c| c.2.to_string()).collect();
        cols.extend(keywords.iter().cloned());
        types.extend(kw_types.iter().map(|s| s.to_string()));
        row.extend(kw_examples.iter().cloned());
        cols.extend(post.iter().map(|c| c.0.to_string()));
        types.extend(post.iter().map(|c| c.1.to_string()));
        row.extend(post.iter().map(|c| c.2.to_string()));
        json!({"table_name": name, "column_names": cols, "data_types": types, "example_row": row})
    };
    json!([
        scaffold(format!("{}Records", camel(&head)), &[("id", "INT", "1")], &[("value", "FLOAT", "0.5")]),
        scaffold(
            format!("{}ByRegion", camel(&head)),
            &[("region", "TEXT", "North"), ("year", "INT", "2020")],
            &[("count", "INT", "10")]
        ),
        scaffold(
            format!("{}Timeline", camel(&head)),
            &[("date", "DATE", "2020-01-01")],
            &[("measurement", "FLOAT", "1.0")]
        ),
    ])
}

fn reformulation(cluster: &str, query: &str) -> Value {
    let label = most_frequent_token(cluster.split("; ")).unwrap_or_else(|| "related topics".into());
    json!({
        "query": format!("Analyze {label} in the context of {}", query.trim()),
        "reason": format!("focuses on {label} datasets"),
    })
}

fn concepts(cluster: &str) -> Value {
    let groups: Vec<Vec<String>> = serde_json::from_str(cluster).unwrap_or_default();
    let labels: Vec<String> = groups
        .iter()
        .map(|g| most_frequent_token(g.iter().map(String::as_str)).unwrap_or_else(|| "attribute".into()))
        .collect();
    json!(labels)
}

fn relevance(bindings: &std::collections::BTreeMap<String, String>) -> Value {
    let get = |k: &str| bindings.get(k).map(String::as_str).unwrap_or("");
    let query: BTreeSet<String> = content_tokens(get("query")).into_iter().collect();
    let mut evidence: BTreeSet<String> = BTreeSet::new();
    for field in ["description", "schema", "purpose"] {
        evidence.extend(content_tokens(get(field)));
    }
    let shared: Vec<&String> = query.intersection(&evidence).collect();
    let utilities = if shared.is_empty() {
        "No significant utilities.".to_string()
    } else {
        let list: Vec<&str> = shared.iter().take(5).map(|s| s.as_str()).collect();
        format!("Contains attributes and content related to {}.", list.join(", "))
    };
    let limitations = if get("source").trim() == "N/A" || get("source").trim().is_empty() {
        "The data source and collection method are not documented.".to_string()
    } else {
        "No significant limitations.".to_string()
    };
    json!({"utilities": utilities, "limitations": limitations})
}
