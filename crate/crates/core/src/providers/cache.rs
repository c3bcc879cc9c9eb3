use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{hex, Captioner, ProviderError, Rewriter};

/// SHA-256 over the provider identity (endpoint and prompt name) and the
/// request input, as lowercase hex.
pub fn cache_key(identity: &str, parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in std::iter::once(identity).chain(parts.iter().copied()) {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex(&h.finalize())
}

/// Content-addressed text store: `<dir>/<key[..2]>/<key>.txt`.
#[derive(Debug, Clone)]
pub struct TextCache {
    dir: PathBuf,
}

impl TextCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path(key)).ok()
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, text: &str) -> Result<(), ProviderError> {
        let path = self.path(key);
        let err = |e: std::io::Error| ProviderError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent).map_err(err)?;
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp).map_err(err)?;
            f.write_all(text.as_bytes()).map_err(err)?;
        }
        fs::rename(&tmp, &path).map_err(err)
    }

    fn get_or_insert(
        &self,
        key: String,
        compute: impl FnOnce() -> Result<String, ProviderError>,
    ) -> Result<String, ProviderError> {
        if let Some(hit) = self.get(&key) {
            return Ok(hit);
        }
        let text = compute()?;
        self.put(&key, &text)?;
        Ok(text)
    }
}

/// Captioner whose successful results are cached on disk.
pub struct CachedCaptioner<C> {
    inner: C,
    cache: TextCache,
}

impl<C: Captioner> CachedCaptioner<C> {
    pub fn new(inner: C, cache: TextCache) -> Self {
        Self { inner, cache }
    }
}

impl<C: Captioner> Captioner for CachedCaptioner<C> {
    fn caption(&self, image_ref: &str, class_label: &str) -> Result<String, ProviderError> {
        let key = cache_key(&self.inner.identity(), &[image_ref, class_label]);
        self.cache
            .get_or_insert(key, || self.inner.caption(image_ref, class_label))
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn concurrency(&self) -> usize {
        self.inner.concurrency()
    }
}

/// Rewriter whose successful results are cached on disk.
pub struct CachedRewriter<R> {
    inner: R,
    cache: TextCache,
}

impl<R: Rewriter> CachedRewriter<R> {
    pub fn new(inner: R, cache: TextCache) -> Self {
        Self { inner, cache }
    }
}

impl<R: Rewriter> Rewriter for CachedRewriter<R> {
    fn rephrase(&self, text: &str) -> Result<String, ProviderError> {
        let key = cache_key(&self.inner.identity(), &[text]);
        self.cache.get_or_insert(key, || self.inner.rephrase(text))
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn concurrency(&self) -> usize {
        self.inner.concurrency()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl Rewriter for Counting {
        fn rephrase(&self, text: &str) -> Result<String, ProviderError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            if text == "fail" {
                return Err(ProviderError::EmptyRewrite);
            }
            Ok(text.to_uppercase())
        }

        fn identity(&self) -> String {
            "mem|rephrase_pr".into()
        }
    }

    #[test]
    fn keys_separate_fields() {
        assert_ne!(cache_key("ab", &["c"]), cache_key("a", &["bc"]));
        assert_eq!(cache_key("e|p", &["x"]).len(), 64);
    }

    #[test]
    fn second_call_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let r = CachedRewriter::new(Counting(AtomicUsize::new(0)), TextCache::new(dir.path()));
        assert_eq!(r.rephrase("abc").unwrap(), "ABC");
        assert_eq!(r.rephrase("abc").unwrap(), "ABC");
        assert_eq!(r.inner.0.load(Ordering::SeqCst), 1);
        assert!(r.rephrase("fail").is_err());
        assert!(r.rephrase("fail").is_err());
        assert_eq!(r.inner.0.load(Ordering::SeqCst), 3, "failures are not cached");
    }
}
