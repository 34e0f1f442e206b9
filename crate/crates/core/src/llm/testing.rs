//! Provider doubles for tests: scripted replies, call counting with fault
//! injection, and a slow provider that records peak concurrency.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;

use super::{CompletionRequest, MockProvider, Provider, ProviderError, TemplateName};

/// Replays a fixed sequence of completion replies. Embeddings are served
/// by an inner mock.
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<Result<String, ProviderError>>>,
    prompts: Mutex<Vec<String>>,
    embedder: MockProvider,
}

impl ScriptedProvider {
    pub fn new(replies: impl IntoIterator<Item = Result<String, ProviderError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
            embedder: MockProvider::default(),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

#[async_trait]
impl Provider for ScriptedProvider {
    fn describe(&self) -> String {
        "scripted".into()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.prompts.lock().unwrap().push(request.prompt.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::Fatal("script exhausted".into())))
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        self.embedder.embed(texts).await
    }
}

/// Wraps a provider, counting calls per template and optionally failing
/// selected templates (or embeddings) on demand.
pub struct CountingProvider {
    inner: Arc<dyn Provider>,
    completions: Mutex<HashMap<TemplateName, usize>>,
    embed_calls: AtomicUsize,
    embedded_texts: AtomicUsize,
    failing: Mutex<HashSet<TemplateName>>,
    fail_embeddings: Mutex<bool>,
}

impl CountingProvider {
    pub fn new(inner: Arc<dyn Provider>) -> Self {
        Self {
            inner,
            completions: Mutex::new(HashMap::new()),
            embed_calls: AtomicUsize::new(0),
            embedded_texts: AtomicUsize::new(0),
            failing: Mutex::new(HashSet::new()),
            fail_embeddings: Mutex::new(false),
        }
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(MockProvider::default()))
    }

    pub fn calls(&self, template: TemplateName) -> usize {
        self.completions.lock().unwrap().get(&template).copied().unwrap_or(0)
    }

    pub fn total_completions(&self) -> usize {
        self.completions.lock().unwrap().values().sum()
    }

    pub fn embed_calls(&self) -> usize {
        self.embed_calls.load(Ordering::SeqCst)
    }

    pub fn embedded_texts(&self) -> usize {
        self.embedded_texts.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.completions.lock().unwrap().clear();
        self.embed_calls.store(0, Ordering::SeqCst);
        self.embedded_texts.store(0, Ordering::SeqCst);
    }

    pub fn set_failing(&self, template: TemplateName, failing: bool) {
        let mut set = self.failing.lock().unwrap();
        if failing {
            set.insert(template);
        } else {
            set.remove(&template);
        }
    }

    pub fn set_embeddings_failing(&self, failing: bool) {
        *self.fail_embeddings.lock().unwrap() = failing;
    }
}

#[async_trait]
impl Provider for CountingProvider {
    fn describe(&self) -> String {
        format!("counting({})", self.inner.describe())
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        *self.completions.lock().unwrap().entry(request.template).or_default() += 1;
        if self.failing.lock().unwrap().contains(&request.template) {
            return Err(ProviderError::Fatal(format!("injected failure for {}", request.template)));
        }
        self.inner.complete(request).await
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        self.embedded_texts.fetch_add(texts.len(), Ordering::SeqCst);
        if *self.fail_embeddings.lock().unwrap() {
            return Err(ProviderError::Fatal("injected embedding failure".into()));
        }
        self.inner.embed(texts).await
    }
}

/// Sleeps on every call and records the peak number of concurrent calls.
pub struct SlowProvider {
    delay: Duration,
    current: AtomicUsize,
    peak: AtomicUsize,
    inner: MockProvider,
}

impl SlowProvider {
    pub fn new(delay: Duration) -> Self {
        Self { delay, current: AtomicUsize::new(0), peak: AtomicUsize::new(0), inner: MockProvider::default() }
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    async fn hold(&self) {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        tokio::time::sleep(self.delay).await;
        self.current.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl Provider for SlowProvider {
    fn describe(&self) -> String {
        "slow".into()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.hold().await;
        self.inner.complete(request).await
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        self.hold().await;
        self.inner.embed(texts).await
    }
}
