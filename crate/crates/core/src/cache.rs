//! Per-node content store and admission policies.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::naming::{ChunkDescriptor, ContentId};
use crate::time::SimTime;
use crate::topology::NodeId;
use crate::DetMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacheReplacement {
    #[default]
    Lru,
    Fifo,
}

/// Freshness regime of a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoreMode {
    /// Currency is carried by the name; entries never expire.
    Lira,
    /// Entries expire `ttl` after insertion.
    Ttl { ttl: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit { chunk: ChunkDescriptor, inserted: SimTime },
    Miss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admission {
    /// Leave a copy at every cache on the delivery path.
    #[default]
    Lce,
    /// Cache at one uniformly drawn node of the delivery path.
    Choice,
}

#[derive(Debug, Clone)]
struct Item {
    chunk: ChunkDescriptor,
    inserted: SimTime,
    stamp: u64,
}

#[derive(Debug, Clone)]
pub struct ContentStore {
    capacity: usize,
    mode: StoreMode,
    replacement: CacheReplacement,
    items: DetMap<ContentId, Item>,
    queue: VecDeque<(ContentId, u64)>,
    clock: u64,
}

impl ContentStore {
    pub fn new(capacity: usize, mode: StoreMode, replacement: CacheReplacement) -> Self {
        ContentStore { capacity, mode, replacement, items: DetMap::default(), queue: VecDeque::new(), clock: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Presence check without side effects (no recency update, no expiry).
    pub fn contains(&self, cid: &ContentId) -> bool {
        self.items.contains_key(cid)
    }

    fn stamp(&mut self, cid: ContentId) -> u64 {
        // compact before pushing: the caller updates the stamp afterwards
        if self.queue.len() > 2 * self.capacity + 16 {
            let items = &self.items;
            self.queue.retain(|(c, s)| items.get(c).is_some_and(|it| it.stamp == *s));
        }
        self.clock += 1;
        self.queue.push_back((cid, self.clock));
        self.clock
    }

    fn expired(&self, it: &Item, now: SimTime) -> bool {
        match self.mode {
            StoreMode::Lira => false,
            StoreMode::Ttl { ttl } => now.saturating_sub(it.inserted) > ttl,
        }
    }

    pub fn lookup(&mut self, cid: &ContentId, now: SimTime) -> Lookup {
        let Some(it) = self.items.get(cid) else {
            return Lookup::Miss;
        };
        if self.expired(it, now) {
            self.items.remove(cid);
            return Lookup::Miss;
        }
        let hit = Lookup::Hit { chunk: it.chunk, inserted: it.inserted };
        if self.replacement == CacheReplacement::Lru {
            let s = self.stamp(*cid);
            self.items.get_mut(cid).unwrap().stamp = s;
        }
        hit
    }

    /// Inserts `cid` as most recent. Re-admitting refreshes recency, and a
    /// newer version also restarts the entry's age.
    pub fn admit(&mut self, cid: ContentId, chunk: ChunkDescriptor, now: SimTime) -> Option<ContentId> {
        if self.capacity == 0 {
            return None;
        }
        if let Some(it) = self.items.get(&cid) {
            let newer = chunk.version > it.chunk.version;
            let refresh = self.replacement == CacheReplacement::Lru;
            let s = if refresh { Some(self.stamp(cid)) } else { None };
            let it = self.items.get_mut(&cid).unwrap();
            if let Some(s) = s {
                it.stamp = s;
            }
            if newer {
                it.chunk = chunk;
                it.inserted = now;
            }
            return None;
        }
        let mut evicted = None;
        if self.items.len() >= self.capacity {
            while let Some((c, s)) = self.queue.pop_front() {
                if self.items.get(&c).is_some_and(|it| it.stamp == s) {
                    self.items.remove(&c);
                    evicted = Some(c);
                    break;
                }
            }
        }
        let stamp = self.stamp(cid);
        self.items.insert(cid, Item { chunk, inserted: now, stamp });
        evicted
    }

    pub fn purge(&mut self, cids: &[ContentId]) -> usize {
        cids.iter().filter(|c| self.items.remove(c).is_some()).count()
    }

    /// Cached cids, eviction order first.
    pub fn cids(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.queue.iter().filter(|(c, s)| self.items.get(c).is_some_and(|it| it.stamp == *s)).map(|(c, _)| *c)
    }
}

/// Nodes of `path` that keep a copy of the delivered chunk.
pub fn select_cache_node<R: Rng>(path: &[NodeId], policy: Admission, rng: &mut R) -> Vec<NodeId> {
    match policy {
        _ if path.is_empty() => Vec::new(),
        Admission::Lce => path.to_vec(),
        Admission::Choice => vec![path[rng.random_range(0..path.len())]],
    }
}
