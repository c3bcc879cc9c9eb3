//! Text embedding, image captioning and query rewriting behind small traits,
//! with HTTP clients, a deterministic synthetic embedder and on-disk caches.

mod cache;
mod http;
mod synthetic;
mod template;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, CachedCaptioner, CachedRewriter, TextCache};
pub use http::{HttpCaptioner, HttpEmbedder, HttpRewriter, HttpTransport};
pub use synthetic::SyntheticEmbedder;
pub use template::{PromptTemplate, TemplateName, CLASS_PLACEHOLDER, DEFAULT_MAX_OUTPUT_TOKENS};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("provider at {endpoint} unavailable: {message}")]
    Unavailable { endpoint: String, message: String },
    #[error("request to {endpoint} timed out after {timeout_ms} ms")]
    Timeout { endpoint: String, timeout_ms: u64 },
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimInconsistent {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty caption for image {0}")]
    EmptyCaption(String),
    #[error("empty rewrite")]
    EmptyRewrite,
    #[error("no input texts")]
    EmptyInput,
    #[error("malformed response from {endpoint}: {message}")]
    BadResponse { endpoint: String, message: String },
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("cache error on {path}: {message}")]
    Cache { path: String, message: String },
}

/// Connection settings for one HTTP provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Sent verbatim as the `Authorization` header.
    pub auth_header: Option<String>,
    pub max_concurrent_requests: usize,
    pub request_batch_size: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            timeout_ms: 60_000,
            max_retries: 3,
            retry_backoff_ms: 500,
            auth_header: None,
            max_concurrent_requests: 4,
            request_batch_size: 64,
        }
    }
}

impl ProviderConfig {
    pub fn with_endpoint(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::InvalidConfig(m.to_string()));
        if self.endpoint_url.is_empty() {
            return bad("endpoint_url is empty");
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        if self.retry_backoff_ms == 0 {
            return bad("retry_backoff_ms must be positive");
        }
        if self.max_concurrent_requests == 0 {
            return bad("max_concurrent_requests must be at least 1");
        }
        if self.request_batch_size == 0 {
            return bad("request_batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Text encoder `f`.
pub trait TextEmbedder: Sync {
    /// One vector per input, in input order, all of one dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;
    /// Stable name of the embedding space; stamped into fitted shifts.
    fn identity(&self) -> String;
}

/// Image captioner `ψ`.
pub trait Captioner: Sync {
    fn caption(&self, image_ref: &str, class_label: &str) -> Result<String, ProviderError>;
    fn identity(&self) -> String;
    /// Upper bound on useful parallel calls.
    fn concurrency(&self) -> usize {
        1
    }
}

/// Query rewriter `g`.
pub trait Rewriter: Sync {
    fn rephrase(&self, text: &str) -> Result<String, ProviderError>;
    fn identity(&self) -> String;
    fn concurrency(&self) -> usize {
        1
    }
}

/// Applies `f` to every item with at most `limit` calls in flight; results
/// come back in input order.
pub fn bounded_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

/// Checks that all vectors share one dimension and are finite.
pub(crate) fn check_vectors(
    endpoint: &str,
    vectors: &[Vec<f32>],
    expected: Option<usize>,
) -> Result<usize, ProviderError> {
    let dim = expected.or_else(|| vectors.first().map(Vec::len)).unwrap_or(0);
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(ProviderError::DimInconsistent {
                index,
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ProviderError::BadResponse {
                endpoint: endpoint.to_string(),
                message: format!("vector {index} has non-finite components"),
            });
        }
    }
    Ok(dim)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
