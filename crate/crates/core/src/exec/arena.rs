//! Scratch accounting and the constant-intermediate cache.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::tn::Tensor;

const BYTES: usize = 16;
const POOL_LIMIT: usize = 16;

/// (plan id, node, slice projection)
pub(crate) type CacheKey = (u64, usize, u64);

#[derive(Debug)]
struct Entry {
    tensor: Arc<Tensor>,
    bytes: usize,
    /// Multiply-adds saved per hit.
    benefit: f64,
}

#[derive(Debug, Default)]
pub(crate) struct Cache {
    budget: usize,
    used: usize,
    generation: Option<u64>,
    entries: BTreeMap<CacheKey, Entry>,
    seen: BTreeSet<CacheKey>,
    hits: u64,
    recomputes: u64,
    evictions: u64,
    pub recommended: usize,
}

impl Cache {
    /// Drops everything when the network generation changed.
    pub fn sync_generation(&mut self, generation: u64) {
        if self.generation != Some(generation) {
            self.entries.clear();
            self.seen.clear();
            self.used = 0;
            self.generation = Some(generation);
        }
    }

    pub fn lookup(&mut self, key: &CacheKey) -> Option<Arc<Tensor>> {
        let hit = self.entries.get(key).map(|e| Arc::clone(&e.tensor));
        if hit.is_some() {
            self.hits += 1;
        }
        hit
    }

    pub fn with_budget(budget: usize) -> Self {
        Cache { budget, ..Cache::default() }
    }

    /// Records a computation of a cacheable node and tries to keep it,
    /// evicting entries of lowest benefit per byte first. Returns whether it
    /// was stored.
    pub fn offer(&mut self, key: CacheKey, tensor: &Arc<Tensor>, benefit: f64) -> bool {
        if !self.seen.insert(key) {
            self.recomputes += 1;
        }
        let bytes = tensor.len() * BYTES;
        if bytes > self.budget {
            return false;
        }
        let density = benefit / bytes as f64;
        while self.used + bytes > self.budget {
            let victim = self
                .entries
                .iter()
                .min_by(|a, b| (a.1.benefit / a.1.bytes as f64).total_cmp(&(b.1.benefit / b.1.bytes as f64)).then(a.0.cmp(b.0)))
                .map(|(k, e)| (*k, e.benefit / e.bytes as f64));
            match victim {
                Some((k, d)) if d <= density => {
                    let e = self.entries.remove(&k).expect("present");
                    self.used -= e.bytes;
                    self.evictions += 1;
                }
                _ => return false,
            }
        }
        self.used += bytes;
        self.entries.insert(key, Entry { tensor: Arc::clone(tensor), bytes, benefit });
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub used_bytes: usize,
    pub recommended_bytes: usize,
    pub budget_bytes: usize,
    pub entries: usize,
    pub hits: u64,
    /// Computations of a cacheable node that had been computed before.
    pub recomputes: u64,
    pub evictions: u64,
}

/// Scratch and cache memory for contractions. Scratch is byte-accounted and
/// its buffers are pooled across slices; the cache outlives calls.
#[derive(Debug)]
pub struct WorkspaceArena {
    capacity: usize,
    in_use: usize,
    high_water: usize,
    pool: Vec<Vec<C64>>,
    pub(crate) cache: Cache,
    flops: f64,
    nodes_computed: u64,
}

impl WorkspaceArena {
    pub fn new(scratch_bytes: usize, cache_bytes: usize) -> Self {
        WorkspaceArena {
            capacity: scratch_bytes,
            in_use: 0,
            high_water: 0,
            pool: Vec::new(),
            cache: Cache::with_budget(cache_bytes),
            flops: 0.0,
            nodes_computed: 0,
        }
    }

    pub fn scratch_bytes(&self) -> usize {
        self.capacity
    }

    pub fn cache_bytes(&self) -> usize {
        self.cache.budget
    }

    /// Largest scratch usage since creation or the last reset.
    pub fn high_water(&self) -> usize {
        self.high_water
    }

    /// Multiply-adds executed since creation or the last reset.
    pub fn flops_executed(&self) -> f64 {
        self.flops
    }

    pub fn nodes_computed(&self) -> u64 {
        self.nodes_computed
    }

    pub fn reset_counters(&mut self) {
        self.high_water = self.in_use;
        self.flops = 0.0;
        self.nodes_computed = 0;
    }

    pub fn clear_cache(&mut self) {
        let budget = self.cache.budget;
        self.cache = Cache::with_budget(budget);
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats {
            used_bytes: self.cache.used,
            recommended_bytes: self.cache.recommended,
            budget_bytes: self.cache.budget,
            entries: self.cache.entries.len(),
            hits: self.cache.hits,
            recomputes: self.cache.recomputes,
            evictions: self.cache.evictions,
        }
    }

    pub(crate) fn charge(&mut self, elems: usize) -> Result<()> {
        let bytes = elems * BYTES;
        if self.in_use + bytes > self.capacity {
            return Err(Error::WorkspaceTooSmall { required: self.in_use + bytes, available: self.capacity });
        }
        self.in_use += bytes;
        self.high_water = self.high_water.max(self.in_use);
        Ok(())
    }

    pub(crate) fn release(&mut self, elems: usize) {
        self.in_use -= elems * BYTES;
    }

    /// Charges `elems` and hands out a pooled buffer.
    pub(crate) fn take(&mut self, elems: usize) -> Result<Vec<C64>> {
        self.charge(elems)?;
        let best = (0..self.pool.len()).filter(|&i| self.pool[i].capacity() >= elems).min_by_key(|&i| self.pool[i].capacity());
        Ok(match best {
            Some(i) => self.pool.swap_remove(i),
            None => Vec::with_capacity(elems),
        })
    }

    /// Releases the charge of a buffer obtained from [`Self::take`] and pools it.
    pub(crate) fn give(&mut self, buf: Vec<C64>, elems: usize) {
        self.release(elems);
        if self.pool.len() < POOL_LIMIT {
            self.pool.push(buf);
        }
    }

    pub(crate) fn count(&mut self, flops: f64) {
        self.flops += flops;
        self.nodes_computed += 1;
    }
}
