#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use scout_core::config::ScoutConfig;
use scout_core::corpus::{load_corpus, RawDatasetRecord};
use scout_core::engine::Engine;
use scout_core::llm::testing::CountingProvider;
use scout_core::llm::{LlmGateway, ProviderConfig};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus.jsonl")
}

pub fn fixture_records() -> Vec<RawDatasetRecord> {
    let loaded = load_corpus(fixture_path()).expect("fixture loads");
    assert!(loaded.diagnostics.is_empty(), "{:?}", loaded.diagnostics);
    loaded.records
}

pub async fn fixture_engine(config: ScoutConfig) -> Engine {
    Engine::from_records(fixture_records(), Arc::new(LlmGateway::mock()), config).await.expect("engine")
}

/// Engine whose provider counts (and can fail) calls.
pub async fn counted_engine(config: ScoutConfig) -> (Engine, Arc<CountingProvider>) {
    let provider = Arc::new(CountingProvider::mock());
    let gateway = Arc::new(LlmGateway::new(provider.clone(), ProviderConfig::mock()));
    let engine = Engine::from_records(fixture_records(), gateway, config).await.expect("engine");
    provider.reset();
    (engine, provider)
}

/// Cosine computed from scratch in f64.
pub fn oracle_cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    dot / (na.sqrt() * nb.sqrt())
}
