mod common;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scout_core::api::SearchRequest;
use scout_core::assist::{kmeans, KMeansParams, UNAVAILABLE};
use scout_core::config::ScoutConfig;
use scout_core::llm::TemplateName;
use scout_core::search::FilterSet;
use scout_core::text::tokenize;
use scout_core::EmbeddingVector;

fn request(q: &str) -> SearchRequest {
    SearchRequest { query: q.into(), ..Default::default() }
}

#[tokio::test]
async fn reformulations_are_grounded_in_results() {
    let engine = common::fixture_engine(ScoutConfig::default()).await;
    for q in ["quality of life during COVID", "remote work stress and vacation", "movie ratings by genre"] {
        let r = engine.search(&request(q), false).await.unwrap().response;
        let result_ids: HashSet<&str> = r.results.iter().map(|c| c.dataset_id.as_str()).collect();
        assert_eq!(r.reformulations.len(), 3, "{q}");
        for s in &r.reformulations {
            assert!(s.matching_count >= 1);
            assert_eq!(s.matching_count, s.cluster_dataset_ids.len());
            assert!(s.cluster_dataset_ids.iter().all(|id| result_ids.contains(id.as_str())));
            assert!(!s.query.is_empty() && !s.reason.is_empty());
        }
        assert!(r.concepts.len() <= 5 && !r.concepts.is_empty());
        assert!(r.granularity_suggestions.temporal.len() <= 3);
        assert!(r.granularity_suggestions.spatial.len() <= 3);
    }
}

#[tokio::test]
async fn concept_labels_come_from_member_columns() {
    let engine = common::fixture_engine(ScoutConfig::default()).await;
    let r = engine.search(&request("remote work stress and vacation"), false).await.unwrap().response;
    let result_ids: HashSet<&str> = r.results.iter().map(|c| c.dataset_id.as_str()).collect();
    for c in &r.concepts {
        let tokens: HashSet<String> = c.member_attribute_ids.iter().flat_map(|m| tokenize(&m.column_name)).collect();
        assert!(tokens.contains(&c.label), "label {:?} not in {:?}", c.label, tokens);
        assert!(c.member_attribute_ids.iter().all(|m| result_ids.contains(m.dataset_id.as_str())));
        assert_eq!(c.centroid.as_ref().unwrap().dim(), 512);
    }

    // applying a concept keeps exactly the result datasets owning a member
    let concept = r.concepts[0].clone();
    let owners: HashSet<String> = concept.member_attribute_ids.iter().map(|m| m.dataset_id.clone()).collect();
    let filtered = engine
        .search(
            &SearchRequest {
                query: "remote work stress and vacation".into(),
                task_type: None,
                filters: FilterSet { concepts: vec![concept], ..Default::default() },
            },
            true,
        )
        .await
        .unwrap()
        .response;
    let got: HashSet<String> = filtered.results.iter().map(|c| c.dataset_id.clone()).collect();
    let expected: HashSet<String> = r.results.iter().map(|c| c.dataset_id.clone()).filter(|id| owners.contains(id)).collect();
    assert_eq!(got, expected);
    assert_ne!(filtered.state_digest, r.state_digest);
}

#[tokio::test]
async fn granularity_suggestions_are_most_frequent_tags() {
    let engine = common::fixture_engine(ScoutConfig::default()).await;
    let r = engine.search(&request("happiness and gdp per country"), false).await.unwrap().response;
    let mut counts = std::collections::BTreeMap::new();
    for c in &r.results {
        if let Some(t) = c.granularity.temporal {
            *counts.entry(t).or_insert(0usize) += 1;
        }
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.rank().cmp(&a.0.rank())));
    let want: Vec<_> = ranked.into_iter().take(3).map(|(t, _)| t).collect();
    assert_eq!(r.granularity_suggestions.temporal, want);
}

#[test]
fn kmeans_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<EmbeddingVector> =
        (0..300).map(|_| EmbeddingVector::new((0..32).map(|_| rng.gen::<f32>() - 0.5).collect()).unwrap().normalized().unwrap()).collect();
    let first = kmeans(&pts, KMeansParams::default());
    for _ in 0..10 {
        assert_eq!(kmeans(&pts, KMeansParams::default()), first);
    }
    assert_eq!(first.k_effective, 15);
    for w in first.inertia_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", first.inertia_history);
    }
    for n in [1usize, 3, 14, 15, 16] {
        let r = kmeans(&pts[..n], KMeansParams::default());
        assert_eq!(r.k_effective, n.min(15));
        let used: HashSet<usize> = r.assignments.iter().copied().collect();
        assert_eq!(used.len(), r.k_effective);
    }
    let same = vec![pts[0].clone(); 40];
    assert_eq!(kmeans(&same, KMeansParams::default()).k_effective, 1);
}

#[tokio::test]
async fn relevance_is_eager_for_top5_then_cached() {
    let (engine, provider) = common::counted_engine(ScoutConfig::default()).await;
    let out = engine.search(&request("remote work stress and vacation"), true).await.unwrap();
    assert_eq!(provider.calls(TemplateName::RelevanceIndicators), 0);
    assert_eq!(out.eager_relevance.len(), 5);
    let digest = out.response.state_digest.clone();
    engine.prefetch_relevance(&digest, &out.eager_relevance).await;
    assert_eq!(provider.calls(TemplateName::RelevanceIndicators), 5);

    // repeat views and a repeated search: no new calls
    for id in &out.eager_relevance {
        let ind = engine.relevance(&digest, id).await.unwrap();
        assert_eq!(&ind.dataset_id, id);
        assert_eq!(ind.generated_for, digest);
    }
    let again = engine.search(&request("remote work stress and vacation"), true).await.unwrap();
    assert_eq!(again.response.state_digest, digest);
    engine.prefetch_relevance(&digest, &again.eager_relevance).await;
    assert_eq!(provider.calls(TemplateName::RelevanceIndicators), 5);

    // a result outside the top five is generated lazily, once
    let sixth = out.response.results[5].dataset_id.clone();
    engine.relevance(&digest, &sixth).await.unwrap();
    engine.relevance(&digest, &sixth).await.unwrap();
    assert_eq!(provider.calls(TemplateName::RelevanceIndicators), 6);

    // changing the filters changes the state and regenerates
    let mut changed = request("remote work stress and vacation");
    changed.filters.exact.min_rows = Some(1);
    let out2 = engine.search(&changed, true).await.unwrap();
    assert_ne!(out2.response.state_digest, digest);
    engine.prefetch_relevance(&out2.response.state_digest, &out2.eager_relevance).await;
    assert_eq!(provider.calls(TemplateName::RelevanceIndicators), 11);
}

#[tokio::test]
async fn relevance_failures_are_reported_and_not_cached() {
    let (engine, provider) = common::counted_engine(ScoutConfig::default()).await;
    let out = engine.search(&request("movie ratings by genre"), true).await.unwrap();
    let digest = out.response.state_digest;
    let id = out.response.results[0].dataset_id.clone();
    provider.set_failing(TemplateName::RelevanceIndicators, true);
    let ind = engine.relevance(&digest, &id).await.unwrap();
    assert_eq!(ind.utilities, UNAVAILABLE);
    provider.set_failing(TemplateName::RelevanceIndicators, false);
    let ind = engine.relevance(&digest, &id).await.unwrap();
    assert_ne!(ind.utilities, UNAVAILABLE);

    assert!(engine.relevance("no-such-digest", &id).await.is_err());
    assert!(engine.relevance(&digest, "no-such-dataset").await.is_err());
}

#[tokio::test]
async fn provider_outage_degrades_to_exact_filters() {
    let (engine, provider) = common::counted_engine(ScoutConfig::default()).await;
    provider.set_failing(TemplateName::HypotheticalSchemas, true);
    let mut req = request("movie ratings by genre");
    req.filters.exact.tags_any = vec!["movies".into()];
    let r = engine.search(&req, false).await.unwrap().response;
    assert!(r.semantic_unavailable);
    assert!(r.reformulations.is_empty() && r.concepts.is_empty());
    let tagged = engine.catalog().datasets.values().filter(|d| d.record.tags.iter().any(|t| t == "movies")).count();
    assert_eq!(r.results.len(), tagged);
    let downloads: Vec<u64> = r.results.iter().map(|c| c.downloads.unwrap()).collect();
    assert!(downloads.windows(2).all(|w| w[0] >= w[1]));
    assert!(r.results.iter().all(|c| c.tags.iter().any(|t| t == "movies")));
}

#[tokio::test]
async fn concept_outage_omits_concepts_only() {
    let (engine, provider) = common::counted_engine(ScoutConfig::default()).await;
    provider.set_failing(TemplateName::ColumnConcepts, true);
    let r = engine.search(&request("movie ratings by genre"), false).await.unwrap().response;
    assert!(!r.semantic_unavailable);
    assert!(r.concepts.is_empty());
    assert_eq!(r.reformulations.len(), 3);
    assert!(r.diagnostics.iter().any(|d| d.contains("concept")));
}

#[tokio::test]
async fn deferred_suggestions_match_inline_ones() {
    let engine = common::fixture_engine(ScoutConfig::default()).await;
    let inline = engine.search(&request("air pollution by hour"), false).await.unwrap().response;
    let other = common::fixture_engine(ScoutConfig::default()).await;
    let deferred = other.search(&request("air pollution by hour"), true).await.unwrap().response;
    assert!(deferred.suggestions_pending && deferred.reformulations.is_empty());
    let s = other.suggestions(&deferred.state_digest).await.unwrap();
    assert_eq!(s.bundle.reformulations, inline.reformulations);
    assert_eq!(s.bundle.concepts, inline.concepts);
    assert_eq!(s.bundle.granularity_suggestions, inline.granularity_suggestions);
    assert!(other.suggestions("unknown").await.is_err());
}
