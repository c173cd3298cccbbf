//! Per-node message handling: routers (cache, C-FIB, multicast, races),
//! requesting clients and provider hosts.
//!
//! Handlers never touch the event queue. They push [`Action`]s that the
//! engine turns into link deliveries, timers and metric records.

mod client;
mod host;
mod router;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::cache::Admission;
use crate::metrics::{HitRecord, Source};
use crate::naming::{ChunkDescriptor, ContentId};
use crate::provider::{ProviderError, ResolutionReply};
use crate::time::SimTime;
use crate::topology::{Graph, Iface, IpFib, NodeId};

pub use client::ClientState;
pub use host::ProviderHost;
pub use router::{RouterState, Transfer, TransferState};

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub ip_src: NodeId,
    pub ip_dst: NodeId,
    /// Links crossed so far.
    pub hops: u32,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Request(RequestMsg),
    Data(DataMsg),
    /// Withdraws interest in `cid` through the interface it arrives on.
    Nack {
        cid: ContentId,
    },
    Resolve {
        object: u32,
        start_chunk: u32,
        fetch: u64,
    },
    ResolveReply {
        reply: Result<ResolutionReply, ProviderError>,
        fetch: u64,
        piggyback: Option<DataMsg>,
    },
    /// The provider no longer serves `cid`; the client must resolve again.
    Reresolve {
        cid: ContentId,
        rid: u64,
    },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Request(_) => "request",
            Body::Data(_) => "data",
            Body::Nack { .. } => "nack",
            Body::Resolve { .. } => "resolve",
            Body::ResolveReply { .. } => "resolve_reply",
            Body::Reresolve { .. } => "reresolve",
        }
    }

    pub fn cid(&self) -> Option<ContentId> {
        match self {
            Body::Request(r) => Some(r.cid),
            Body::Data(d) => Some(d.cid),
            Body::Nack { cid } | Body::Reresolve { cid, .. } => Some(*cid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestMsg {
    pub cid: ContentId,
    pub origin: NodeId,
    /// Request id, unique per client attempt.
    pub rid: u64,
    /// Set once any copy in this request's lineage left through an
    /// interface other than the IP next hop.
    pub diverted: bool,
    /// Caching nodes that missed on the way, candidates for admission.
    pub caches: SmallVec<[NodeId; 8]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMsg {
    pub cid: ContentId,
    pub chunk: ChunkDescriptor,
    pub rid: u64,
    pub source: Source,
    /// Retired names the receiving caches should drop.
    pub purge: Vec<ContentId>,
    /// Nodes that admit the chunk as it passes.
    pub cache_at: SmallVec<[NodeId; 8]>,
}

/// Timers a node can set on itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalEvent {
    /// End of chunk for the transfer opened in `epoch`.
    Eoc { cid: ContentId, epoch: u64 },
    /// Client gives up waiting for `rid`.
    Timeout { fetch: u64, rid: u64 },
    /// The chunk finished arriving at the client.
    ChunkDone { fetch: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Counter {
    /// Request refused at a node that had nowhere to send it.
    RequestDropped,
    /// Data with no transfer and no route.
    DataDropped,
    /// Data copy ignored because its transfer was already served.
    DuplicateData,
    NacksSent,
    Timeouts,
    Reresolves,
    VerifyFailures,
    CfibEvictions,
    /// Cache entries removed by purge lists.
    Purged,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Send(Iface, Message),
    Schedule(SimTime, LocalEvent),
    Record(HitRecord),
    FetchDone(u64),
    Count(Counter),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardPolicy {
    /// `{if_I} ∪ if_TI`.
    #[default]
    All,
    /// Breadcrumbs only; the upstream interface is tried once they fail.
    BreadcrumbsOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub admission: Admission,
    /// First byte to end of chunk at every node.
    pub chunk_duration: SimTime,
    pub forward_policy: ForwardPolicy,
    /// Client wait before retrying a chunk request.
    pub request_timeout: SimTime,
    /// Attempts per chunk before the client resolves again.
    pub max_attempts: u32,
    /// Deliver chunk data inside the resolution reply.
    pub piggyback_first_chunk: bool,
    /// Check delivered data against its name.
    pub verify: bool,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            admission: Admission::Lce,
            chunk_duration: SimTime::ZERO,
            forward_policy: ForwardPolicy::All,
            request_timeout: SimTime::from_secs(2.0),
            max_attempts: 3,
            piggyback_first_chunk: false,
            verify: true,
        }
    }
}

/// What a handler may read about the world.
pub struct NodeCtx<'a> {
    pub id: NodeId,
    pub now: SimTime,
    pub graph: &'a Graph,
    pub fib: &'a IpFib,
    pub cfg: &'a NodeConfig,
    /// Provider host for each object, `providers[object % len]`.
    pub providers: &'a [NodeId],
    /// Admission draws.
    pub rng: &'a mut ChaCha8Rng,
}

impl NodeCtx<'_> {
    pub fn next_hop(&self, dst: NodeId) -> Option<Iface> {
        self.fib.next_hop(self.id, dst)
    }

    pub fn provider_of(&self, object: u32) -> NodeId {
        self.providers[object as usize % self.providers.len()]
    }
}

/// Sends `msg` toward `msg.ip_dst` by IP, or counts a drop.
pub(crate) fn route(ctx: &NodeCtx, msg: Message, out: &mut Vec<Action>) {
    match ctx.next_hop(msg.ip_dst) {
        Some(i) => out.push(Action::Send(i, msg)),
        None => out.push(Action::Count(match msg.body {
            Body::Data(_) => Counter::DataDropped,
            _ => Counter::RequestDropped,
        })),
    }
}
