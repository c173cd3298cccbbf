//! Content Forwarding Information Base: per-chunk forwarding state that
//! doubles as a pending-request table (`if_O`, `mIP`) and a breadcrumb
//! table (`if_TI`).

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::naming::ContentId;
use crate::topology::{Iface, NodeId};
use crate::DetMap;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfibError {
    #[error("no C-FIB entry for {0}")]
    MissingEntry(ContentId),
    #[error("request for {0} arrived on its upstream interface")]
    UpstreamArrival(ContentId),
}

/// Small sorted set of interfaces.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct IfaceSet(SmallVec<[Iface; 4]>);

impl IfaceSet {
    pub fn new() -> Self {
        IfaceSet(SmallVec::new())
    }

    pub fn insert(&mut self, i: Iface) -> bool {
        match self.0.binary_search(&i) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, i);
                true
            }
        }
    }

    pub fn remove(&mut self, i: Iface) -> bool {
        match self.0.binary_search(&i) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn contains(&self, i: Iface) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = Iface> + '_ {
        self.0.iter().copied()
    }

    pub fn first(&self) -> Option<Iface> {
        self.0.first().copied()
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn as_slice(&self) -> &[Iface] {
        &self.0
    }
}

impl FromIterator<Iface> for IfaceSet {
    fn from_iter<T: IntoIterator<Item = Iface>>(iter: T) -> Self {
        let mut s = IfaceSet::new();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfibEntry {
    pub cid: ContentId,
    pub if_i: Option<Iface>,
    pub if_o: IfaceSet,
    pub if_ti: IfaceSet,
    /// Clients whose requests were suppressed here, for data duplication.
    pub mip: SmallVec<[NodeId; 2]>,
}

impl CfibEntry {
    fn new(cid: ContentId) -> Self {
        CfibEntry { cid, if_i: None, if_o: IfaceSet::new(), if_ti: IfaceSet::new(), mip: SmallVec::new() }
    }

    fn add_if_o(&mut self, iface: Iface) {
        self.if_o.insert(iface);
        self.if_ti.remove(iface);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// A transfer is in flight; collapse the request into it.
    Suppress,
    Forward(IfaceSet),
    /// The request came back through a breadcrumb interface.
    Discard,
    NoEntry,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Replacement {
    #[default]
    Fifo,
    Lru,
}

#[derive(Debug, Clone)]
struct Slot {
    entry: CfibEntry,
    stamp: u64,
}

/// Bounded table. Eviction follows insertion order (FIFO) unless built with
/// [`Replacement::Lru`], in which case every mutation refreshes the entry.
#[derive(Debug, Clone)]
pub struct CfibTable {
    capacity: usize,
    policy: Replacement,
    slots: DetMap<ContentId, Slot>,
    // (cid, stamp) pairs; a pair is dead once the slot's stamp moved on
    queue: VecDeque<(ContentId, u64)>,
    clock: u64,
    evictions: u64,
}

impl CfibTable {
    pub fn new(capacity: usize, policy: Replacement) -> Self {
        CfibTable { capacity, policy, slots: DetMap::default(), queue: VecDeque::new(), clock: 0, evictions: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn get(&self, cid: &ContentId) -> Option<&CfibEntry> {
        self.slots.get(cid).map(|s| &s.entry)
    }

    pub fn contains(&self, cid: &ContentId) -> bool {
        self.slots.contains_key(cid)
    }

    fn push(&mut self, cid: ContentId) -> u64 {
        // compact before pushing: the caller updates the stamp afterwards
        if self.queue.len() > 2 * self.capacity + 16 {
            let slots = &self.slots;
            self.queue.retain(|(c, s)| slots.get(c).is_some_and(|slot| slot.stamp == *s));
        }
        self.clock += 1;
        self.queue.push_back((cid, self.clock));
        self.clock
    }

    fn evict_one(&mut self) -> Option<ContentId> {
        while let Some((cid, stamp)) = self.queue.pop_front() {
            if self.slots.get(&cid).is_some_and(|s| s.stamp == stamp) {
                self.slots.remove(&cid);
                self.evictions += 1;
                return Some(cid);
            }
        }
        None
    }

    /// Returns the entry for `cid`, inserting it if needed. `None` only for
    /// a zero-capacity table. The second value is the evicted cid, if any.
    fn upsert(&mut self, cid: ContentId) -> (Option<&mut CfibEntry>, Option<ContentId>) {
        if self.capacity == 0 {
            return (None, None);
        }
        let mut evicted = None;
        if self.slots.contains_key(&cid) {
            if self.policy == Replacement::Lru {
                let stamp = self.push(cid);
                self.slots.get_mut(&cid).unwrap().stamp = stamp;
            }
        } else {
            if self.slots.len() >= self.capacity {
                evicted = self.evict_one();
            }
            let stamp = self.push(cid);
            self.slots.insert(cid, Slot { entry: CfibEntry::new(cid), stamp });
        }
        (self.slots.get_mut(&cid).map(|s| &mut s.entry), evicted)
    }

    /// The request arriving on `in_if` was sent out on `out_if`. Returns the
    /// evicted cid when the insert displaced another entry.
    pub fn on_request_forwarded(&mut self, cid: ContentId, in_if: Iface, out_if: Iface) -> Option<ContentId> {
        debug_assert_ne!(in_if, out_if);
        let (entry, evicted) = self.upsert(cid);
        if let Some(e) = entry {
            e.if_i = Some(out_if);
            e.if_o.remove(out_if);
            e.add_if_o(in_if);
        }
        evicted
    }

    pub fn on_request_suppressed(&mut self, cid: ContentId, in_if: Iface, client: NodeId) -> Result<(), CfibError> {
        match self.slots.get(&cid) {
            None => return Err(CfibError::MissingEntry(cid)),
            Some(s) if s.entry.if_i == Some(in_if) => return Err(CfibError::UpstreamArrival(cid)),
            Some(_) => {}
        }
        let e = self.upsert(cid).0.expect("present entry");
        e.add_if_o(in_if);
        if !e.mip.contains(&client) {
            e.mip.push(client);
        }
        Ok(())
    }

    /// The local cache answers a request that came in on `in_if`. A new entry
    /// points upstream through `default_if_i`.
    pub fn on_local_serve(&mut self, cid: ContentId, in_if: Iface, default_if_i: Option<Iface>) -> Option<ContentId> {
        let (entry, evicted) = self.upsert(cid);
        if let Some(e) = entry {
            if e.if_i.is_none() && default_if_i != Some(in_if) {
                e.if_i = default_if_i;
            }
            if e.if_i != Some(in_if) {
                e.add_if_o(in_if);
            }
        }
        evicted
    }

    pub fn on_eoc(&mut self, cid: &ContentId) {
        if let Some(s) = self.slots.get_mut(cid) {
            let e = &mut s.entry;
            for i in e.if_o.iter() {
                e.if_ti.insert(i);
            }
            e.if_o.clear();
            e.mip.clear();
        }
    }

    pub fn forwarding_targets(&self, cid: &ContentId, in_if: Iface) -> Decision {
        let Some(s) = self.slots.get(cid) else {
            return Decision::NoEntry;
        };
        let e = &s.entry;
        if e.if_ti.contains(in_if) {
            return Decision::Discard;
        }
        if !e.if_o.is_empty() {
            return Decision::Suppress;
        }
        let mut out: IfaceSet = e.if_ti.iter().collect();
        if let Some(i) = e.if_i {
            out.insert(i);
        }
        out.remove(in_if);
        Decision::Forward(out)
    }

    /// Drops a breadcrumb.
    pub fn prune(&mut self, cid: &ContentId, iface: Iface) {
        if let Some(s) = self.slots.get_mut(cid) {
            s.entry.if_ti.remove(iface);
        }
    }

    /// Withdraws a pending delivery on `iface` together with the clients
    /// that were reached through it.
    pub fn cancel(&mut self, cid: &ContentId, iface: Iface, clients: &[NodeId]) {
        if let Some(s) = self.slots.get_mut(cid) {
            s.entry.if_o.remove(iface);
            s.entry.mip.retain(|c| !clients.contains(c));
        }
    }

    /// Forgets pending deliveries whose transfer was abandoned, keeping the
    /// breadcrumbs.
    pub fn clear_pending(&mut self, cid: &ContentId) {
        if let Some(s) = self.slots.get_mut(cid) {
            s.entry.if_o.clear();
            s.entry.mip.clear();
        }
    }

    /// Live entries, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &CfibEntry> + '_ {
        self.queue.iter().filter_map(|(cid, stamp)| self.slots.get(cid).filter(|s| s.stamp == *stamp).map(|s| &s.entry))
    }

    /// Debug dump, one `cid,if_I,if_O,if_TI,mIP` row per entry in eviction
    /// order. Sets are space separated, empty fields are `-`.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("cid,if_I,if_O,if_TI,mIP\n");
        for e in self.entries() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.cid,
                e.if_i.map_or("-".to_string(), |i| i.0.to_string()),
                join(e.if_o.iter().map(|i| i.0.to_string())),
                join(e.if_ti.iter().map(|i| i.0.to_string())),
                join(e.mip.iter().map(|n| n.to_string())),
            );
        }
        out
    }

    /// Rough per-entry memory footprint in bytes.
    pub fn bytes_per_entry() -> usize {
        std::mem::size_of::<Slot>() + std::mem::size_of::<ContentId>() + 2 * std::mem::size_of::<(ContentId, u64)>()
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    let v: Vec<String> = items.collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}
