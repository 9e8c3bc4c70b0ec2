//! On-disk cache of per-row results, keyed by a hash of the task name and
//! everything that determines the row.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::config::{canonical, sha256_hex};
use super::table::write_atomic;
use crate::error::Result;

/// Bump when the meaning of cached rows changes.
const CACHE_SCHEMA: u32 = 1;

pub const CACHE_ENV: &str = "SENSOR_CACHE_DIR";

#[derive(Debug)]
pub struct RowCache {
    root: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl RowCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RowCache { root: root.into(), hits: AtomicUsize::new(0), misses: AtomicUsize::new(0) }
    }

    /// `$SENSOR_CACHE_DIR` if set and non-empty, otherwise `<out>/.cache`.
    pub fn for_output(out: &Path) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(out.join(".cache")),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key<P: Serialize>(task: &str, point: &P) -> String {
        let value = serde_json::json!({
            "schema": CACHE_SCHEMA,
            "task": task,
            "point": point,
        });
        sha256_hex(canonical(&value).as_bytes())
    }

    fn path(&self, task: &str, key: &str) -> PathBuf {
        self.root.join(task).join(&key[..2]).join(format!("{key}.json"))
    }

    /// Cached value, or `None` on a miss or an unreadable entry.
    pub fn get<R: DeserializeOwned>(&self, task: &str, key: &str) -> Option<R> {
        let found = std::fs::read(self.path(task, key))
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok());
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn put<R: Serialize>(&self, task: &str, key: &str, value: &R) -> Result<()> {
        let bytes = serde_json::to_vec(value).map_err(|e| crate::error::Error::Config(e.to_string()))?;
        write_atomic(&self.path(task, key), &bytes)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let c = RowCache::new(dir.path());
        let k = RowCache::key("t", &(1.5, 2usize));
        assert_eq!(c.get::<f64>("t", &k), None);
        c.put("t", &k, &0.1f64).unwrap();
        assert_eq!(c.get::<f64>("t", &k), Some(0.1));
        assert_eq!((c.hits(), c.misses()), (1, 1));
    }

    #[test]
    fn keys_separate_tasks_and_points() {
        let a = RowCache::key("a", &1.0);
        assert_ne!(a, RowCache::key("b", &1.0));
        assert_ne!(a, RowCache::key("a", &1.0000000000000002));
        assert_eq!(a, RowCache::key("a", &1.0));
    }
}
