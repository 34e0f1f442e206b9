mod common;

use std::sync::Arc;

use scout_core::catalog::{self, Catalog};
use scout_core::enrich::{dataset_embedding_input, EnrichOptions, Enricher, Journal};
use scout_core::granularity::{SpatialGranularity, TemporalGranularity};
use scout_core::llm::LlmGateway;

#[test]
fn fixture_record_count_matches_file_lines() {
    let text = std::fs::read_to_string(common::fixture_path()).unwrap();
    let lines = text.lines().filter(|l| !l.trim().is_empty()).count();
    assert_eq!(lines, 100);
    assert_eq!(common::fixture_records().len(), lines);
}

#[tokio::test]
async fn mock_enrichment_of_fixture() {
    let enricher = Enricher::new(Arc::new(LlmGateway::mock()), EnrichOptions::default());
    let report = enricher.run(common::fixture_records(), None).await.unwrap();
    assert_eq!(report.performed, 100);
    assert_eq!(report.failed, 0);
    assert!(report.datasets.iter().all(|d| d.is_semantic()));
    for d in &report.datasets {
        let aug = d.augmented.as_ref().unwrap();
        let names: Vec<&str> = aug.column_descriptions.iter().map(|c| c.column_name.as_str()).collect();
        let expected: Vec<&str> = d.record.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, expected);
        assert_eq!(d.attribute_embeddings.len(), d.record.columns.len());
        assert!(dataset_embedding_input(&d.record).starts_with(&d.record.title));
    }

    let happiness = report.datasets.iter().find(|d| d.record.title == "World Happiness 2019").unwrap();
    let aug = happiness.augmented.as_ref().unwrap();
    assert!(!aug.description_summary.is_empty());
    assert!(aug.dataset_purposes.iter().any(|p| p == "regression"));
    assert_eq!(aug.dataset_sources, "https://worldhappiness.report");

    let gdp = report.datasets.iter().find(|d| d.record.title == "Global GDP by Country 2019").unwrap();
    let cols: Vec<&str> = gdp.record.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(cols, ["country", "year", "gdp"]);
    assert_eq!(gdp.granularity.temporal, Some(TemporalGranularity::Year));
    assert_eq!(gdp.granularity.spatial, Some(SpatialGranularity::Country));
}

#[tokio::test]
async fn enrichment_is_deterministic_and_snapshots_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let enricher = Enricher::new(Arc::new(LlmGateway::mock()), EnrichOptions { batch_size: 7, concurrency: 3 });
        let report = enricher.run(common::fixture_records(), None).await.unwrap();
        let mut c = Catalog::new(512);
        for d in report.datasets {
            c.upsert(d);
        }
        let path = dir.path().join(format!("c{i}.scout"));
        catalog::save(&c, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
        assert_eq!(catalog::load(&path).unwrap(), c);
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[tokio::test]
async fn resumed_run_skips_journaled_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let journal_path = dir.path().join("c.journal");
    let records = common::fixture_records();
    let enricher = Enricher::new(Arc::new(LlmGateway::mock()), EnrichOptions { batch_size: 10, concurrency: 4 });

    let (mut journal, done) = Journal::open(&journal_path).unwrap();
    assert!(done.is_empty());
    let first = enricher.run(records[..30].to_vec(), Some(&mut journal)).await.unwrap();
    drop(journal);

    let (mut journal, done) = Journal::open(&journal_path).unwrap();
    assert_eq!(done.len(), 30);
    assert_eq!(done, first.datasets);
    let finished: std::collections::HashSet<String> = done.iter().map(|d| d.id().to_string()).collect();
    let rest: Vec<_> = records.iter().filter(|r| !finished.contains(&r.id)).cloned().collect();
    let second = enricher.run(rest, Some(&mut journal)).await.unwrap();
    assert_eq!(second.performed, 70);

    let full = enricher.run(records, None).await.unwrap();
    let mut resumed = done;
    resumed.extend(second.datasets);
    assert_eq!(resumed, full.datasets);
}
