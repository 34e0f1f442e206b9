use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};
use tokio::sync::OnceCell;

use crate::corpus::make_preview;
use crate::enrich::EnrichedDataset;
use crate::llm::{bindings, GatewayError, LlmGateway, TemplateName};

use super::SearchState;

/// Text shown when indicators could not be generated.
pub const UNAVAILABLE: &str = "Unavailable";

const SCHEMA_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceIndicator {
    pub dataset_id: String,
    pub utilities: String,
    pub limitations: String,
    /// Digest of the search state the indicator was generated for.
    pub generated_for: String,
}

impl RelevanceIndicator {
    pub fn unavailable(dataset_id: &str, digest: &str) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            utilities: UNAVAILABLE.into(),
            limitations: UNAVAILABLE.into(),
            generated_for: digest.into(),
        }
    }

    pub fn is_available(&self) -> bool {
        self.utilities != UNAVAILABLE || self.limitations != UNAVAILABLE
    }
}

pub fn relevance_bindings(state: &SearchState, dataset: &EnrichedDataset) -> BTreeMap<String, String> {
    let aug = dataset.augmented.as_ref();
    let purposes = aug.map(|a| a.dataset_purposes.join("; ")).unwrap_or_default();
    let source = aug.map(|a| a.dataset_sources.clone()).unwrap_or_else(|| "N/A".into());
    bindings([
        ("description", dataset.record.description.clone()),
        ("schema", make_preview(&dataset.record, SCHEMA_ROWS).rendered),
        ("purpose", purposes),
        ("source", source),
        ("query", state.query.prompt_text()),
        ("filters", state.filters_text()),
    ])
}

/// Generates indicators for one (state, dataset) pair with no caching.
pub async fn generate_indicator(
    gateway: &LlmGateway,
    state: &SearchState,
    dataset: &EnrichedDataset,
) -> Result<RelevanceIndicator, GatewayError> {
    #[derive(Deserialize)]
    struct Reply {
        utilities: String,
        limitations: String,
    }
    let out = gateway
        .complete_structured::<Reply>(TemplateName::RelevanceIndicators, &relevance_bindings(state, dataset))
        .await?;
    Ok(RelevanceIndicator {
        dataset_id: dataset.id().to_string(),
        utilities: out.parsed.utilities.trim().to_string(),
        limitations: out.parsed.limitations.trim().to_string(),
        generated_for: state.digest.clone(),
    })
}

type Key = (String, String);

/// Append-only JSON-lines store for indicators evicted from memory.
struct Overflow {
    path: PathBuf,
    offsets: HashMap<Key, u64>,
}

impl Overflow {
    fn open(path: PathBuf) -> std::io::Result<Self> {
        let mut offsets = HashMap::new();
        if let Ok(f) = File::open(&path) {
            let mut reader = BufReader::new(f);
            let mut offset = 0u64;
            let mut line = String::new();
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 || !line.ends_with('\n') {
                    break;
                }
                if let Ok(ind) = serde_json::from_str::<RelevanceIndicator>(&line) {
                    offsets.insert((ind.generated_for.clone(), ind.dataset_id.clone()), offset);
                }
                offset += n as u64;
            }
            if offset < std::fs::metadata(&path)?.len() {
                OpenOptions::new().write(true).open(&path)?.set_len(offset)?;
            }
        }
        Ok(Self { path, offsets })
    }

    fn put(&mut self, ind: &RelevanceIndicator) -> std::io::Result<()> {
        let key = (ind.generated_for.clone(), ind.dataset_id.clone());
        if self.offsets.contains_key(&key) {
            return Ok(());
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let offset = f.metadata()?.len();
        let mut line = serde_json::to_string(ind).expect("indicator serializes");
        line.push('\n');
        f.write_all(line.as_bytes())?;
        self.offsets.insert(key, offset);
        Ok(())
    }

    fn get(&self, key: &Key) -> Option<RelevanceIndicator> {
        let offset = *self.offsets.get(key)?;
        let mut f = File::open(&self.path).ok()?;
        f.seek(SeekFrom::Start(offset)).ok()?;
        let mut line = String::new();
        BufReader::new(f.take(1 << 20)).read_line(&mut line).ok()?;
        serde_json::from_str(&line).ok()
    }
}

struct Inner {
    lru: LruCache<Key, Arc<OnceCell<RelevanceIndicator>>>,
    overflow: Option<Overflow>,
}

/// Indicators keyed by (state digest, dataset id). Concurrent requests for
/// the same key share one generation; failures are not cached.
pub struct RelevanceCache {
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for RelevanceCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelevanceCache").field("len", &self.len()).finish()
    }
}

impl RelevanceCache {
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn in_memory(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        Self { inner: Mutex::new(Inner { lru: LruCache::new(cap), overflow: None }) }
    }

    /// Cache whose evicted entries spill to `path` (JSON lines).
    pub fn persistent(capacity: usize, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let cache = Self::in_memory(capacity);
        cache.inner.lock().unwrap().overflow = Some(Overflow::open(path.as_ref().to_path_buf())?);
        Ok(cache)
    }

    pub fn overflow_path_for(catalog: &Path) -> PathBuf {
        let mut s = catalog.as_os_str().to_owned();
        s.push(".indicators.jsonl");
        PathBuf::from(s)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().lru.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn peek(&self, digest: &str, dataset_id: &str) -> Option<RelevanceIndicator> {
        let key = (digest.to_string(), dataset_id.to_string());
        let inner = self.inner.lock().unwrap();
        if let Some(cell) = inner.lru.peek(&key) {
            return cell.get().cloned();
        }
        inner.overflow.as_ref().and_then(|o| o.get(&key))
    }

    fn cell(&self, key: Key) -> Arc<OnceCell<RelevanceIndicator>> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(cell) = inner.lru.get(&key) {
            return cell.clone();
        }
        let restored = inner.overflow.as_ref().and_then(|o| o.get(&key));
        let cell = Arc::new(match restored {
            Some(ind) => OnceCell::new_with(Some(ind)),
            None => OnceCell::new(),
        });
        if let Some((_, evicted)) = inner.lru.push(key, cell.clone()) {
            if let (Some(ind), Some(o)) = (evicted.get(), inner.overflow.as_mut()) {
                if let Err(e) = o.put(ind) {
                    tracing::warn!("could not persist relevance indicator: {e}");
                }
            }
        }
        cell
    }

    /// Returns the cached indicator or runs `generate` once for the key.
    pub async fn get_or_generate<F, Fut>(&self, digest: &str, dataset_id: &str, generate: F) -> RelevanceIndicator
    where
        F: FnOnce() -> Fut,
        Fut: Future<Output = Result<RelevanceIndicator, GatewayError>>,
    {
        let cell = self.cell((digest.to_string(), dataset_id.to_string()));
        match cell.get_or_try_init(generate).await {
            Ok(ind) => ind.clone(),
            Err(e) => {
                tracing::warn!(dataset = dataset_id, "relevance indicators unavailable: {e}");
                RelevanceIndicator::unavailable(dataset_id, digest)
            }
        }
    }

    /// Writes every generated in-memory indicator to the overflow store.
    pub fn persist_all(&self) -> std::io::Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let ready: Vec<RelevanceIndicator> = inner.lru.iter().filter_map(|(_, c)| c.get().cloned()).collect();
        if let Some(o) = inner.overflow.as_mut() {
            for ind in &ready {
                o.put(ind)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn ind(d: &str, id: &str) -> RelevanceIndicator {
        RelevanceIndicator { dataset_id: id.into(), utilities: "u".into(), limitations: "l".into(), generated_for: d.into() }
    }

    #[tokio::test]
    async fn generates_once_per_key() {
        let cache = Arc::new(RelevanceCache::in_memory(16));
        let calls = Arc::new(AtomicUsize::new(0));
        let mut tasks = Vec::new();
        for _ in 0..8 {
            let (cache, calls) = (cache.clone(), calls.clone());
            tasks.push(tokio::spawn(async move {
                cache
                    .get_or_generate("d", "x", || async {
                        calls.fetch_add(1, Ordering::SeqCst);
                        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
                        Ok(ind("d", "x"))
                    })
                    .await
            }));
        }
        for t in tasks {
            assert_eq!(t.await.unwrap(), ind("d", "x"));
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let other = cache.get_or_generate("d2", "x", || async { Ok(ind("d2", "x")) }).await;
        assert_eq!(other.generated_for, "d2");
    }

    #[tokio::test]
    async fn failures_are_not_cached() {
        let cache = RelevanceCache::in_memory(4);
        let got = cache
            .get_or_generate("d", "x", || async { Err(GatewayError::InvalidInput("boom".into())) })
            .await;
        assert!(!got.is_available());
        assert!(cache.peek("d", "x").is_none());
        let got = cache.get_or_generate("d", "x", || async { Ok(ind("d", "x")) }).await;
        assert!(got.is_available());
    }

    #[tokio::test]
    async fn evicted_entries_spill_and_come_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ind.jsonl");
        let cache = RelevanceCache::persistent(2, &path).unwrap();
        for id in ["a", "b", "c"] {
            cache.get_or_generate("d", id, || async move { Ok(ind("d", id)) }).await;
        }
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.peek("d", "a"), Some(ind("d", "a")));
        let calls = AtomicUsize::new(0);
        let got = cache
            .get_or_generate("d", "a", || async {
                calls.fetch_add(1, Ordering::SeqCst);
                Ok(ind("d", "zzz"))
            })
            .await;
        assert_eq!(got, ind("d", "a"));
        assert_eq!(calls.load(Ordering::SeqCst), 0);

        cache.persist_all().unwrap();
        let reopened = RelevanceCache::persistent(2, &path).unwrap();
        for id in ["a", "b", "c"] {
            assert_eq!(reopened.peek("d", id), Some(ind("d", id)));
        }
    }
}
