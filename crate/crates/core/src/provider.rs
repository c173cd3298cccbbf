//! Content provider: catalog, name resolution, access logging and name
//! rotation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::naming::{chunk_payload, mint_cid, transition_interval, ChunkDescriptor, ContentId, PADDING_LEN};
use crate::time::SimTime;
use crate::topology::NodeId;
use crate::DetMap;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("object {0} is not in this provider's catalog")]
    UnknownObject(u32),
    #[error("object {object} has {chunks} chunks, start chunk {start} is out of range")]
    BadChunk { object: u32, start: u32, chunks: u32 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamingMode {
    /// Names change with every rotation.
    #[default]
    Ephemeral,
    /// One name per chunk for its whole life; rotation only bumps the
    /// version behind it (the TTL baselines).
    Permanent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub bundle: usize,
    pub naming: NamingMode,
    /// Rotation schedule, `None` to keep versions fixed.
    pub rotation: Option<RotationParams>,
    /// Attach retired names to served data so caches drop them.
    pub purge_lists: bool,
    pub purge_depth: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig { bundle: 8, naming: NamingMode::Ephemeral, rotation: None, purge_lists: false, purge_depth: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationParams {
    pub t_base: SimTime,
    pub t_min: SimTime,
}

#[derive(Debug, Clone)]
struct ChunkState {
    version: u32,
    padding: [u8; PADDING_LEN],
    cid: ContentId,
    retired: VecDeque<ContentId>,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub object_id: u32,
    chunks: Vec<ChunkState>,
    /// Resolutions since the last rotation.
    pub popularity: u64,
    pub next_rotation: Option<SimTime>,
}

impl CatalogEntry {
    pub fn chunk_count(&self) -> u32 {
        self.chunks.len() as u32
    }

    pub fn current(&self, chunk: u32) -> (ContentId, u32) {
        let c = &self.chunks[chunk as usize];
        (c.cid, c.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionReply {
    pub object_id: u32,
    pub start_chunk: u32,
    pub bundle: Vec<ContentId>,
    /// Versions current at reply time, parallel to `bundle`. Accounting
    /// only: a client cannot learn them from a permanent name.
    pub versions: Vec<u32>,
    pub provider: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Served {
    Data {
        chunk: ChunkDescriptor,
        purge_list: Vec<ContentId>,
    },
    /// The name is not current; the client must resolve again.
    Reresolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub time: SimTime,
    pub object_id: u32,
    pub client: NodeId,
}

/// One provider owning the objects `o` with `o % stride == offset`.
#[derive(Debug, Clone)]
pub struct Provider {
    node: NodeId,
    cfg: ProviderConfig,
    stride: u32,
    offset: u32,
    objects: Vec<CatalogEntry>,
    by_cid: DetMap<ContentId, (u32, u32)>,
    due: BinaryHeap<Reverse<(SimTime, u32)>>,
    rng: ChaCha8Rng,
    log: Vec<AccessRecord>,
}

impl Provider {
    /// `padding_seed` drives padding draws and rotation phases.
    pub fn new(
        node: NodeId,
        cfg: ProviderConfig,
        catalog_size: u32,
        chunks_per_object: u32,
        stride: u32,
        offset: u32,
        padding_seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(padding_seed);
        let mut objects = Vec::new();
        let mut by_cid = DetMap::default();
        let mut due = BinaryHeap::new();
        for object_id in (offset..catalog_size).step_by(stride.max(1) as usize) {
            let chunks = (0..chunks_per_object)
                .map(|chunk| {
                    let padding = match cfg.naming {
                        NamingMode::Ephemeral => rng.random(),
                        NamingMode::Permanent => [0; PADDING_LEN],
                    };
                    let d = ChunkDescriptor { object_id, chunk_index: chunk, version: 0, padding };
                    let cid = mint_cid(&d, &chunk_payload(object_id, chunk, 0));
                    by_cid.insert(cid, (object_id, chunk));
                    ChunkState { version: 0, padding, cid, retired: VecDeque::new() }
                })
                .collect();
            // random phase so objects do not all rotate in lockstep
            let next_rotation = cfg.rotation.map(|r| SimTime(rng.random_range(0..r.t_base.0.max(1))));
            if let Some(t) = next_rotation {
                due.push(Reverse((t, object_id)));
            }
            objects.push(CatalogEntry { object_id, chunks, popularity: 0, next_rotation });
        }
        Provider { node, cfg, stride: stride.max(1), offset, objects, by_cid, due, rng, log: Vec::new() }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn owns(&self, object_id: u32) -> bool {
        object_id % self.stride == self.offset && self.entry(object_id).is_some()
    }

    pub fn entry(&self, object_id: u32) -> Option<&CatalogEntry> {
        if object_id % self.stride != self.offset {
            return None;
        }
        self.objects.get((object_id / self.stride) as usize)
    }

    fn entry_mut(&mut self, object_id: u32) -> Option<&mut CatalogEntry> {
        if object_id % self.stride != self.offset {
            return None;
        }
        self.objects.get_mut((object_id / self.stride) as usize)
    }

    pub fn resolve(
        &mut self,
        object_id: u32,
        start_chunk: u32,
        client: NodeId,
        now: SimTime,
    ) -> Result<ResolutionReply, ProviderError> {
        let bundle_len = self.cfg.bundle.max(1) as u32;
        let node = self.node;
        let e = self.entry_mut(object_id).ok_or(ProviderError::UnknownObject(object_id))?;
        let chunks = e.chunk_count();
        if start_chunk >= chunks {
            return Err(ProviderError::BadChunk { object: object_id, start: start_chunk, chunks });
        }
        e.popularity += 1;
        let end = (start_chunk + bundle_len).min(chunks);
        let bundle = (start_chunk..end).map(|c| e.chunks[c as usize].cid).collect();
        let versions = (start_chunk..end).map(|c| e.chunks[c as usize].version).collect();
        self.log.push(AccessRecord { time: now, object_id, client });
        Ok(ResolutionReply { object_id, start_chunk, bundle, versions, provider: node })
    }

    pub fn serve_chunk(&self, cid: &ContentId) -> Served {
        let Some(&(object_id, chunk)) = self.by_cid.get(cid) else {
            return Served::Reresolve;
        };
        let c = &self.entry(object_id).expect("indexed object").chunks[chunk as usize];
        let purge_list = if self.cfg.purge_lists { c.retired.iter().copied().collect() } else { Vec::new() };
        Served::Data {
            chunk: ChunkDescriptor { object_id, chunk_index: chunk, version: c.version, padding: c.padding },
            purge_list,
        }
    }

    /// Current (cid, version) of a chunk.
    pub fn current(&self, object_id: u32, chunk: u32) -> Option<(ContentId, u32)> {
        self.entry(object_id).map(|e| e.current(chunk))
    }

    pub fn next_rotation_time(&self) -> Option<SimTime> {
        self.due.peek().map(|Reverse((t, _))| *t)
    }

    /// Rotates every object due at `now`. Returns (old, new) name pairs.
    pub fn rotate_names(&mut self, now: SimTime) -> Vec<(ContentId, ContentId)> {
        let Some(params) = self.cfg.rotation else {
            return Vec::new();
        };
        let mut pairs = Vec::new();
        while let Some(&Reverse((t, object_id))) = self.due.peek() {
            if t > now {
                break;
            }
            self.due.pop();
            let naming = self.cfg.naming;
            let depth = self.cfg.purge_depth;
            let idx = (object_id / self.stride) as usize;
            let e = &mut self.objects[idx];
            for (chunk, c) in e.chunks.iter_mut().enumerate() {
                c.version += 1;
                if naming == NamingMode::Ephemeral {
                    c.padding = self.rng.random();
                    let d = ChunkDescriptor {
                        object_id,
                        chunk_index: chunk as u32,
                        version: c.version,
                        padding: c.padding,
                    };
                    let new = mint_cid(&d, &chunk_payload(object_id, chunk as u32, c.version));
                    self.by_cid.remove(&c.cid);
                    self.by_cid.insert(new, (object_id, chunk as u32));
                    c.retired.push_front(c.cid);
                    c.retired.truncate(depth);
                    pairs.push((c.cid, new));
                    c.cid = new;
                } else {
                    pairs.push((c.cid, c.cid));
                }
            }
            let next = now + transition_interval(e.popularity, params.t_base, params.t_min);
            e.popularity = 0;
            e.next_rotation = Some(next);
            self.due.push(Reverse((next, object_id)));
        }
        pairs
    }

    pub fn access_log(&self) -> &[AccessRecord] {
        &self.log
    }

    pub fn access_count(&self, object_id: u32) -> usize {
        self.log.iter().filter(|r| r.object_id == object_id).count()
    }

    /// `time,object_id,client_id`, time in seconds.
    pub fn access_log_csv(&self) -> String {
        let mut out = String::from("time,object_id,client_id\n");
        for r in &self.log {
            let _ = writeln!(out, "{:.6},{},{}", r.time.as_secs(), r.object_id, r.client.0);
        }
        out
    }
}
