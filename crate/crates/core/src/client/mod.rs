//! Completion client: backends, retry, rate limiting, a persistent
//! generation store and in-flight deduplication.

mod http;
mod limit;
mod mock;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{final_mr_line, PromptBundle, QaMarkers};
use crate::util::sha256_hex;

pub use http::{
    load_backends, parse_backends, resolve_response_path, HttpAdapterConfig, HttpBackend,
};
pub use limit::{Budget, RateLimiter};
pub use mock::{viggo_sentence, MockBackend};
pub use store::GenerationStore;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
    #[error("final MR line of the prompt does not parse: {0:?}")]
    UnparsableTestMr(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("backend {backend} failed after {attempts} attempt(s): {message}")]
    Backend {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("credential environment variable {0} is not set")]
    AuthMissing(String),
    #[error("request budget of {limit} exhausted")]
    BudgetExceeded { limit: u64 },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("final MR line of the prompt does not parse: {0:?}")]
    UnparsableTestMr(String),
    #[error("generation store: {0}")]
    Store(String),
    #[error("configuration: {0}")]
    Config(String),
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub num_candidates: u32,
    pub backend_id: String,
}

impl CompletionParams {
    pub fn new(backend_id: &str) -> Self {
        CompletionParams {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop_sequences: Vec::new(),
            num_candidates: 1,
            backend_id: backend_id.to_string(),
        }
    }

    pub fn for_bundle(backend_id: &str, bundle: &PromptBundle) -> Self {
        CompletionParams {
            stop_sequences: bundle.stop_sequences.clone(),
            ..Self::new(backend_id)
        }
    }

    pub fn with_candidates(mut self, n: u32) -> Self {
        self.num_candidates = n.max(1);
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub cache_key: String,
    pub backend_id: String,
    /// Test MR taken from the prompt's last line, when one could be found.
    #[serde(default)]
    pub mr: Option<String>,
    pub prompt: String,
    pub params: CompletionParams,
    pub candidates: Vec<String>,
    pub latency_ms: u64,
    pub created_at: DateTime<Utc>,
    /// Free-form labels such as the test topic, set by the caller. They are
    /// not part of the cache key; a cache hit keeps the first caller's tags.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

/// Digest of the canonical JSON encoding of `(backend_id, prompt, params)`.
pub fn cache_key(backend_id: &str, prompt: &str, params: &CompletionParams) -> String {
    let canonical = serde_json::json!([backend_id, prompt, params]);
    sha256_hex(canonical.to_string().as_bytes())
}

/// Cuts a raw completion at the first stop sequence. Leading whitespace is
/// dropped first so a stop sequence such as "\n" does not empty a
/// completion that starts with a newline.
pub fn truncate_at_stop(text: &str, stops: &[String]) -> String {
    let text = text.trim_start();
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].trim().to_string()
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete_raw(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Vec<String>, BackendError>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_attempts: 1,
            ..Self::default()
        }
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.initial_delay
            .saturating_mul(factor)
            .min(self.max_delay)
    }
}

type Slot = Arc<(
    Mutex<Option<Result<GenerationRecord, ClientError>>>,
    Condvar,
)>;

pub struct Client {
    backend: Box<dyn Backend>,
    store: Option<Arc<GenerationStore>>,
    limiter: Option<RateLimiter>,
    budget: Option<Budget>,
    retry: RetryPolicy,
    markers: QaMarkers,
    in_flight: Mutex<HashMap<String, Slot>>,
}

impl Client {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Client {
            backend,
            store: None,
            limiter: None,
            budget: None,
            retry: RetryPolicy::default(),
            markers: QaMarkers::default(),
            in_flight: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_store(mut self, store: Arc<GenerationStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_rate_limit(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_budget(mut self, max_requests: u64) -> Self {
        self.budget = Some(Budget::new(max_requests));
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_markers(mut self, markers: QaMarkers) -> Self {
        self.markers = markers;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn store(&self) -> Option<&GenerationStore> {
        self.store.as_deref()
    }

    /// Backend requests actually sent, cache hits excluded.
    pub fn requests_used(&self) -> Option<u64> {
        self.budget.as_ref().map(Budget::used)
    }

    pub fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<GenerationRecord, ClientError> {
        self.complete_tagged(prompt, params, &BTreeMap::new())
    }

    pub fn complete_tagged(
        &self,
        prompt: &str,
        params: &CompletionParams,
        tags: &BTreeMap<String, String>,
    ) -> Result<GenerationRecord, ClientError> {
        if prompt.trim().is_empty() {
            return Err(ClientError::EmptyPrompt);
        }
        let key = cache_key(self.backend.id(), prompt, params);
        if let Some(hit) = self.store.as_ref().and_then(|s| s.get(&key)) {
            return Ok(hit);
        }

        let (slot, leader) = {
            let mut map = self.in_flight.lock().expect("in-flight lock");
            match map.get(&key) {
                Some(s) => (s.clone(), false),
                None => {
                    let s: Slot = Arc::new((Mutex::new(None), Condvar::new()));
                    map.insert(key.clone(), s.clone());
                    (s, true)
                }
            }
        };
        if !leader {
            let (lock, cv) = &*slot;
            let mut guard = lock.lock().expect("in-flight slot lock");
            while guard.is_none() {
                guard = cv.wait(guard).expect("in-flight slot lock");
            }
            return guard.clone().expect("filled");
        }

        let result = self.fetch(&key, prompt, params, tags);
        {
            let (lock, cv) = &*slot;
            *lock.lock().expect("in-flight slot lock") = Some(result.clone());
            cv.notify_all();
        }
        self.in_flight.lock().expect("in-flight lock").remove(&key);
        result
    }

    fn fetch(
        &self,
        key: &str,
        prompt: &str,
        params: &CompletionParams,
        tags: &BTreeMap<String, String>,
    ) -> Result<GenerationRecord, ClientError> {
        // A concurrent leader may have finished between the store check and
        // taking leadership.
        if let Some(hit) = self.store.as_ref().and_then(|s| s.get(key)) {
            return Ok(hit);
        }
        let started = Instant::now();
        let mut attempt = 0;
        let raw = loop {
            attempt += 1;
            if let Some(b) = &self.budget {
                if !b.try_take() {
                    return Err(ClientError::BudgetExceeded { limit: b.limit() });
                }
            }
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.backend.complete_raw(prompt, params) {
                Ok(raw) => break raw,
                Err(BackendError::Transient(msg)) if attempt < self.retry.max_attempts => {
                    log::warn!(
                        "backend {} attempt {attempt} failed: {msg}; retrying",
                        self.backend.id()
                    );
                    std::thread::sleep(self.retry.delay(attempt));
                }
                Err(BackendError::UnparsableTestMr(line)) => {
                    return Err(ClientError::UnparsableTestMr(line))
                }
                Err(BackendError::Transient(msg) | BackendError::Fatal(msg)) => {
                    return Err(ClientError::Backend {
                        backend: self.backend.id().to_string(),
                        attempts: attempt,
                        message: msg,
                    })
                }
            }
        };
        let candidates = raw
            .iter()
            .map(|c| truncate_at_stop(c, &params.stop_sequences))
            .take(params.num_candidates.max(1) as usize)
            .collect();
        let record = GenerationRecord {
            cache_key: key.to_string(),
            backend_id: self.backend.id().to_string(),
            mr: final_mr_line(prompt, &self.markers).map(str::to_string),
            prompt: prompt.to_string(),
            params: params.clone(),
            candidates,
            latency_ms: started.elapsed().as_millis() as u64,
            created_at: Utc::now(),
            tags: tags.clone(),
        };
        if let Some(store) = &self.store {
            store.append(&record)?;
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        reply: String,
    }

    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn complete_raw(&self, _: &str, p: &CompletionParams) -> Result<Vec<String>, BackendError> {
            std::thread::sleep(Duration::from_millis(20));
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Err(BackendError::Transient("503".into()));
            }
            Ok(vec![self.reply.clone(); p.num_candidates as usize + 2])
        }
    }

    fn fast_retry(n: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts: n,
            initial_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(4),
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let client = Client::new(Box::new(Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
            reply: "ok".into(),
        }))
        .with_retry(fast_retry(3));
        let rec = client
            .complete("p", &CompletionParams::new("flaky"))
            .unwrap();
        assert_eq!(rec.candidates, ["ok"]);
    }

    #[test]
    fn gives_up_after_ceiling() {
        let client = Client::new(Box::new(Flaky {
            failures: 9,
            calls: AtomicU32::new(0),
            reply: "ok".into(),
        }))
        .with_retry(fast_retry(3));
        let err = client
            .complete("p", &CompletionParams::new("flaky"))
            .unwrap_err();
        assert!(matches!(err, ClientError::Backend { attempts: 3, .. }));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let r = RetryPolicy {
            max_attempts: 9,
            initial_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(r.delay(1), Duration::from_millis(100));
        assert_eq!(r.delay(2), Duration::from_millis(200));
        assert_eq!(r.delay(3), Duration::from_millis(350));
    }

    #[test]
    fn budget_exceeded() {
        let client = Client::new(Box::new(MockBackend::default())).with_budget(1);
        client
            .complete("a = cast member = b\n", &CompletionParams::new("mock"))
            .unwrap();
        let err = client
            .complete("c = cast member = d\n", &CompletionParams::new("mock"))
            .unwrap_err();
        assert_eq!(err, ClientError::BudgetExceeded { limit: 1 });
    }

    #[test]
    fn empty_prompt_rejected() {
        let client = Client::new(Box::new(MockBackend::default()));
        assert_eq!(
            client
                .complete(" \n", &CompletionParams::new("mock"))
                .unwrap_err(),
            ClientError::EmptyPrompt
        );
    }

    #[test]
    fn candidates_capped_and_truncated() {
        let client = Client::new(Box::new(Flaky {
            failures: 0,
            calls: AtomicU32::new(0),
            reply: "\nfirst\n\nsecond".into(),
        }));
        let params = CompletionParams {
            stop_sequences: vec!["\n\n".into()],
            ..CompletionParams::new("flaky")
        }
        .with_candidates(2);
        let rec = client.complete("p", &params).unwrap();
        assert_eq!(rec.candidates, ["first", "first"]);
    }

    #[test]
    fn concurrent_identical_calls_coalesce() {
        let backend = Arc::new(AtomicU32::new(0));
        struct Counting(Arc<AtomicU32>);
        impl Backend for Counting {
            fn id(&self) -> &str {
                "counting"
            }
            fn complete_raw(
                &self,
                _: &str,
                _: &CompletionParams,
            ) -> Result<Vec<String>, BackendError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(100));
                Ok(vec!["x".into()])
            }
        }
        let client = Client::new(Box::new(Counting(backend.clone())));
        let params = CompletionParams::new("counting");
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| client.complete("same", &params).unwrap());
            }
        });
        assert_eq!(backend.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn store_serves_repeat_calls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.jsonl");
        let calls = Arc::new(AtomicU32::new(0));
        struct Counting(Arc<AtomicU32>);
        impl Backend for Counting {
            fn id(&self) -> &str {
                "counting"
            }
            fn complete_raw(
                &self,
                _: &str,
                _: &CompletionParams,
            ) -> Result<Vec<String>, BackendError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(vec!["y".into()])
            }
        }
        let params = CompletionParams::new("counting");
        {
            let client = Client::new(Box::new(Counting(calls.clone())))
                .with_store(Arc::new(GenerationStore::open(&path).unwrap()));
            let a = client.complete("q", &params).unwrap();
            let b = client.complete("q", &params).unwrap();
            assert_eq!(a, b);
            client
                .complete("q", &params.clone().with_temperature(0.0))
                .unwrap();
        }
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        let reopened = GenerationStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        let client = Client::new(Box::new(Counting(calls.clone()))).with_store(Arc::new(reopened));
        client.complete("q", &params).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    proptest! {
        #[test]
        fn no_candidate_contains_a_stop(text in "[a-c\\n\\[\\]:PROMPT]{0,40}") {
            let stops: Vec<String> = vec!["[PROMPT]:".into(), "\n".into()];
            let out = truncate_at_stop(&text, &stops);
            for s in &stops {
                prop_assert!(!out.contains(s.as_str()));
            }
        }

        #[test]
        fn cache_key_separates_params(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, p in ".{0,20}") {
            let a = CompletionParams::new("b").with_temperature(t1);
            let b = CompletionParams::new("b").with_temperature(t2);
            prop_assert_eq!(cache_key("b", &p, &a) == cache_key("b", &p, &b), a == b);
            let mut c = a.clone();
            c.stop_sequences.push("\n".into());
            prop_assert_ne!(cache_key("b", &p, &a), cache_key("b", &p, &c));
        }
    }
}
