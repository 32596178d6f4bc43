//! Byte-bounded, thread-safe LRU cache for decoded raster blocks.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::Result;
use crate::tiff::Block;

/// Default capacity when neither config nor environment sets one.
pub const DEFAULT_CACHE_BYTES: usize = 128 * 1024 * 1024;

/// Environment variable overriding the cache capacity in bytes.
pub const CACHE_BYTES_ENV: &str = "GEOPATCH_CACHE_BYTES";

/// Cache capacity from `GEOPATCH_CACHE_BYTES`, or `fallback` when unset or unparsable.
pub fn cache_bytes_from_env(fallback: usize) -> usize {
    std::env::var(CACHE_BYTES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(fallback)
}

/// Values that report their resident size.
pub trait Weighted {
    fn weight(&self) -> usize;
}

impl Weighted for Block {
    fn weight(&self) -> usize {
        self.byte_size()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub file: u64,
    pub band: u32,
    pub block_row: u32,
    pub block_col: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub bytes_decoded: u64,
    pub resident_bytes: usize,
    pub entries: usize,
}

impl CacheStats {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        if self.accesses() == 0 {
            0.0
        } else {
            self.hits as f64 / self.accesses() as f64
        }
    }
}

struct Entry<V> {
    value: Arc<V>,
    tick: u64,
    weight: usize,
}

struct Inner<K, V> {
    map: HashMap<K, Entry<V>>,
    // access tick -> key; the first entry is the least recently used
    order: BTreeMap<u64, K>,
    tick: u64,
    resident: usize,
}

impl<K: Copy + Eq + Hash, V> Inner<K, V> {
    fn touch(&mut self, key: &K) -> Option<Arc<V>> {
        self.tick += 1;
        let tick = self.tick;
        let e = self.map.get_mut(key)?;
        self.order.remove(&e.tick);
        e.tick = tick;
        self.order.insert(tick, *key);
        Some(e.value.clone())
    }
}

/// LRU map shared between workers. Loads happen outside the lock, so two
/// workers missing on the same key may both decode it; both count as misses.
pub struct LruCache<K, V> {
    capacity: usize,
    inner: Mutex<Inner<K, V>>,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
    bytes_decoded: AtomicU64,
}

pub type BlockCache = LruCache<BlockKey, Block>;

impl<K: Copy + Eq + Hash, V: Weighted> LruCache<K, V> {
    pub fn new(capacity_bytes: usize) -> Self {
        LruCache {
            capacity: capacity_bytes,
            inner: Mutex::new(Inner {
                map: HashMap::new(),
                order: BTreeMap::new(),
                tick: 0,
                resident: 0,
            }),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evictions: AtomicU64::new(0),
            bytes_decoded: AtomicU64::new(0),
        }
    }

    pub fn capacity_bytes(&self) -> usize {
        self.capacity
    }

    /// Return the resident value for `key`, or run `loader`, insert its
    /// result and evict least-recently-used entries until within capacity.
    pub fn get_or_load<F>(&self, key: K, loader: F) -> Result<Arc<V>>
    where
        F: FnOnce() -> Result<V>,
    {
        if let Some(v) = self.inner.lock().touch(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        Ok(self.admit(key, Arc::new(loader()?)))
    }

    /// Add a value decoded alongside another (e.g. the other bands of a
    /// pixel-interleaved chunk) without touching the hit/miss counters.
    /// A resident entry for `key` is kept as is.
    pub fn insert(&self, key: K, value: Arc<V>) {
        if !self.contains(&key) {
            self.admit(key, value);
        }
    }

    fn admit(&self, key: K, value: Arc<V>) -> Arc<V> {
        let weight = value.weight();
        self.bytes_decoded.fetch_add(weight as u64, Ordering::Relaxed);
        if weight > self.capacity {
            return value;
        }

        let mut inner = self.inner.lock();
        if let Some(existing) = inner.touch(&key) {
            return existing;
        }
        inner.tick += 1;
        let tick = inner.tick;
        inner.map.insert(
            key,
            Entry {
                value: value.clone(),
                tick,
                weight,
            },
        );
        inner.order.insert(tick, key);
        inner.resident += weight;
        while inner.resident > self.capacity {
            let (_, victim) = inner.order.pop_first().expect("resident bytes imply entries");
            let e = inner.map.remove(&victim).expect("order and map agree");
            inner.resident -= e.weight;
            self.evictions.fetch_add(1, Ordering::Relaxed);
        }
        debug_assert!(inner.resident <= self.capacity);
        value
    }

    pub fn contains(&self, key: &K) -> bool {
        self.inner.lock().map.contains_key(key)
    }

    /// Keys from least to most recently used.
    pub fn lru_order(&self) -> Vec<K> {
        self.inner.lock().order.values().copied().collect()
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.lock();
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
            bytes_decoded: self.bytes_decoded.load(Ordering::Relaxed),
            resident_bytes: inner.resident,
            entries: inner.map.len(),
        }
    }

    pub fn reset_counters(&self) {
        self.hits.store(0, Ordering::Relaxed);
        self.misses.store(0, Ordering::Relaxed);
        self.evictions.store(0, Ordering::Relaxed);
        self.bytes_decoded.store(0, Ordering::Relaxed);
    }

    /// Drop every entry (counters are kept).
    pub fn clear(&self) {
        let mut inner = self.inner.lock();
        inner.map.clear();
        inner.order.clear();
        inner.resident = 0;
    }
}
