//! Network graphs, IP shortest-path forwarding tables, betweenness ranking
//! and placement of caches / C-FIB tables on routers.
//!
//! Node ids are dense indices assigned in declaration order; ranking
//! tie-breaks prefer the lower id. Routing breaks equal-latency ties with
//! a fixed per-link weight so every path is the reverse of its return path.

mod deploy;
mod document;
pub mod rocketfuel;
pub mod synth;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

pub use deploy::{apply_deployment, DeploymentPlan, NodeRole, RoleMap, Sizing, Strategy};

/// Dense node identifier; ordering doubles as the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Per-node interface index, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Iface(pub u16);

impl Iface {
    fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Iface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Router,
    Client,
    Provider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub peer: NodeId,
    pub latency: SimTime,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("duplicate edge {0} -- {1}")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("`{host}` must attach to a router, `{target}` is not one")]
    BadAttachment { host: String, target: String },
    #[error("graph is disconnected: `{0}` unreachable from `{1}`")]
    Disconnected(String, String),
    #[error("topology declares no provider")]
    MissingProvider,
    #[error("topology declares no routers")]
    NoRouters,
    #[error("{0}")]
    Deployment(String),
    #[error("cannot read topology `{path}`")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Validated network graph. Routers form the ISP core; clients and
/// providers are hosts hanging off exactly one router through an access link.
#[derive(Debug, Clone)]
pub struct Graph {
    names: Vec<String>,
    kinds: Vec<NodeKind>,
    links: Vec<Vec<Link>>,
    by_name: HashMap<String, NodeId>,
    routers: Vec<NodeId>,
    clients: Vec<NodeId>,
    providers: Vec<NodeId>,
}

impl Graph {
    /// Parses a topology document.
    pub fn parse(text: &str) -> Result<Graph, TopologyError> {
        document::parse(text)
    }

    pub fn to_document(&self) -> String {
        document::render(self)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.index()]
    }

    pub fn is_router(&self, id: NodeId) -> bool {
        self.kind(id) == NodeKind::Router
    }

    pub fn routers(&self) -> &[NodeId] {
        &self.routers
    }

    pub fn clients(&self) -> &[NodeId] {
        &self.clients
    }

    pub fn providers(&self) -> &[NodeId] {
        &self.providers
    }

    /// Links of a node, interface `i` at position `i - 1`.
    pub fn links(&self, id: NodeId) -> &[Link] {
        &self.links[id.index()]
    }

    pub fn link(&self, id: NodeId, iface: Iface) -> Link {
        self.links[id.index()][iface.slot()]
    }

    pub fn ifaces(&self, id: NodeId) -> impl Iterator<Item = Iface> + '_ {
        (1..=self.links[id.index()].len()).map(|i| Iface(i as u16))
    }

    pub fn iface_towards(&self, id: NodeId, peer: NodeId) -> Option<Iface> {
        self.links[id.index()].iter().position(|l| l.peer == peer).map(|p| Iface(p as u16 + 1))
    }

    /// Router a host is attached to, plus the router-side interface.
    pub fn attachment(&self, host: NodeId) -> (NodeId, Iface) {
        let router = self.links[host.index()][0].peer;
        let iface = self.iface_towards(router, host).expect("access link is symmetric");
        (router, iface)
    }

    /// Router-to-router degree (access links excluded).
    pub fn core_degree(&self, id: NodeId) -> usize {
        self.links(id).iter().filter(|l| self.is_router(l.peer)).count()
    }
}

/// Incrementally assembles a [`Graph`]; interfaces are numbered in the order
/// links are added.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    names: Vec<String>,
    kinds: Vec<NodeKind>,
    links: Vec<Vec<Link>>,
    by_name: HashMap<String, NodeId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_node(&mut self, name: &str, kind: NodeKind) -> Result<NodeId, TopologyError> {
        if self.by_name.contains_key(name) {
            return Err(TopologyError::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.kinds.push(kind);
        self.links.push(Vec::new());
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn router(&mut self, name: &str) -> Result<NodeId, TopologyError> {
        self.add_node(name, NodeKind::Router)
    }

    fn lookup(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.by_name.get(name).copied().ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    fn connect(&mut self, a: NodeId, b: NodeId, latency: SimTime) -> Result<(), TopologyError> {
        if a == b {
            return Err(TopologyError::SelfLoop(self.names[a.index()].clone()));
        }
        if self.links[a.index()].iter().any(|l| l.peer == b) {
            return Err(TopologyError::DuplicateEdge(self.names[a.index()].clone(), self.names[b.index()].clone()));
        }
        self.links[a.index()].push(Link { peer: b, latency });
        self.links[b.index()].push(Link { peer: a, latency });
        Ok(())
    }

    pub fn edge(&mut self, a: &str, b: &str, latency: SimTime) -> Result<(), TopologyError> {
        let (a, b) = (self.lookup(a)?, self.lookup(b)?);
        for n in [a, b] {
            if self.kinds[n.index()] != NodeKind::Router {
                return Err(TopologyError::UnknownNode(self.names[n.index()].clone()));
            }
        }
        self.connect(a, b, latency)
    }

    fn attach(&mut self, name: &str, kind: NodeKind, router: &str, latency: SimTime) -> Result<NodeId, TopologyError> {
        let r = self.lookup(router)?;
        if self.kinds[r.index()] != NodeKind::Router {
            return Err(TopologyError::BadAttachment { host: name.to_string(), target: router.to_string() });
        }
        let id = self.add_node(name, kind)?;
        self.connect(r, id, latency)?;
        Ok(id)
    }

    pub fn client(&mut self, name: &str, router: &str, latency: SimTime) -> Result<NodeId, TopologyError> {
        self.attach(name, NodeKind::Client, router, latency)
    }

    pub fn provider(&mut self, name: &str, router: &str, latency: SimTime) -> Result<NodeId, TopologyError> {
        self.attach(name, NodeKind::Provider, router, latency)
    }

    pub fn build(self) -> Result<Graph, TopologyError> {
        let ids = |k: NodeKind| -> Vec<NodeId> {
            (0..self.kinds.len()).filter(|&i| self.kinds[i] == k).map(|i| NodeId(i as u32)).collect()
        };
        let routers = ids(NodeKind::Router);
        let clients = ids(NodeKind::Client);
        let providers = ids(NodeKind::Provider);
        if routers.is_empty() {
            return Err(TopologyError::NoRouters);
        }
        if providers.is_empty() {
            return Err(TopologyError::MissingProvider);
        }
        // connectivity over every node, access links included
        let n = self.names.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for l in &self.links[v] {
                if !seen[l.peer.index()] {
                    seen[l.peer.index()] = true;
                    queue.push_back(l.peer.index());
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(TopologyError::Disconnected(self.names[missing].clone(), self.names[0].clone()));
        }
        Ok(Graph {
            names: self.names,
            kinds: self.kinds,
            links: self.links,
            by_name: self.by_name,
            routers,
            clients,
            providers,
        })
    }
}

/// Reads and validates a topology document from disk.
pub fn load_topology(path: impl AsRef<Path>) -> Result<Graph, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| TopologyError::Io { path: path.display().to_string(), source })?;
    Graph::parse(&text)
}

/// All-pairs IP next hops along minimum-latency paths.
#[derive(Debug, Clone)]
pub struct IpFib {
    n: usize,
    next: Vec<u16>,
    dist: Vec<u64>,
}

impl IpFib {
    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Option<Iface> {
        match self.next[from.index() * self.n + to.index()] {
            0 => None,
            i => Some(Iface(i)),
        }
    }

    /// Shortest-path latency between two nodes.
    pub fn distance(&self, from: NodeId, to: NodeId) -> SimTime {
        SimTime(self.dist[to.index() * self.n + from.index()])
    }

    /// Node sequence of the IP path, both endpoints included.
    pub fn path(&self, g: &Graph, from: NodeId, to: NodeId) -> Vec<NodeId> {
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let hop = self.next_hop(cur, to).expect("connected graph");
            cur = g.link(cur, hop).peer;
            path.push(cur);
            assert!(path.len() <= self.n, "forwarding loop");
        }
        path
    }
}

/// Secondary link weight for routing ties, symmetric in the endpoints.
fn tie_weight(a: NodeId, b: NodeId) -> u64 {
    let (lo, hi) = if a < b { (a.0, b.0) } else { (b.0, a.0) };
    let mut z = ((u64::from(lo) << 32) | u64::from(hi)).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) >> 24
}

/// Routing distances from `src`: (latency, tie weight), compared in order.
fn route_dijkstra(g: &Graph, src: NodeId) -> Vec<(u64, u64)> {
    let n = g.node_count();
    let mut dist = vec![(u64::MAX, u64::MAX); n];
    let mut heap = BinaryHeap::new();
    dist[src.index()] = (0, 0);
    heap.push(Reverse(((0u64, 0u64), src.0)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        let v = NodeId(v);
        // hosts never relay traffic
        if v != src && !g.is_router(v) {
            continue;
        }
        for l in g.links(v) {
            let nd = (d.0 + l.latency.0, d.1 + tie_weight(v, l.peer));
            if nd < dist[l.peer.index()] {
                dist[l.peer.index()] = nd;
                heap.push(Reverse((nd, l.peer.0)));
            }
        }
    }
    dist
}

/// Builds next-hop tables. Paths minimise latency; equal-latency paths are
/// separated by a per-link tie weight, then by the lower peer id, so that
/// the path from `a` to `b` is the reverse of the path from `b` to `a`.
pub fn build_ip_fib(g: &Graph) -> IpFib {
    let n = g.node_count();
    let mut rdist = vec![(0u64, 0u64); n * n];
    for dst in 0..n {
        let d = route_dijkstra(g, NodeId(dst as u32));
        rdist[dst * n..(dst + 1) * n].copy_from_slice(&d);
    }
    let mut next = vec![0u16; n * n];
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let target = rdist[to * n + from];
            let fromid = NodeId(from as u32);
            let best = g
                .links(fromid)
                .iter()
                .enumerate()
                .filter(|(_, l)| {
                    let via = rdist[to * n + l.peer.index()];
                    (l.peer.index() == to || g.is_router(l.peer))
                        && via.0 != u64::MAX
                        && (via.0 + l.latency.0, via.1 + tie_weight(fromid, l.peer)) == target
                })
                .min_by_key(|(_, l)| l.peer)
                .map(|(i, _)| i as u16 + 1);
            next[from * n + to] = best.unwrap_or(0);
        }
    }
    let dist = rdist.into_iter().map(|(d, _)| d).collect();
    IpFib { n, next, dist }
}

/// Exact shortest-path betweenness of every router over the router-only
/// subgraph (undirected, each unordered pair counted once).
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0f64; n];
    for &s in g.routers() {
        let mut order = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![u64::MAX; n];
        let mut delta = vec![0.0f64; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        sigma[s.index()] = 1.0;
        dist[s.index()] = 0;
        heap.push(Reverse((0u64, s.0)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let v = v as usize;
            if settled[v] || d > dist[v] {
                continue;
            }
            settled[v] = true;
            order.push(v);
            for l in g.links(NodeId(v as u32)) {
                let w = l.peer.index();
                if !g.is_router(l.peer) {
                    continue;
                }
                let nd = d + l.latency.0;
                if nd < dist[w] {
                    dist[w] = nd;
                    sigma[w] = sigma[v];
                    preds[w].clear();
                    preds[w].push(v);
                    heap.push(Reverse((nd, w as u32)));
                } else if nd == dist[w] && !settled[w] {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = order.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s.index() {
                bc[w] += delta[w];
            }
        }
    }
    bc.iter_mut().for_each(|b| *b /= 2.0);
    bc
}

/// Routers by descending betweenness, ties by ascending id.
pub fn betweenness_ranking(g: &Graph) -> Vec<NodeId> {
    let bc = betweenness(g);
    // quantize so float noise between equal scores cannot reorder ties
    let key = |id: NodeId| (bc[id.index()] * 1e6).round() as i64;
    let mut ranked = g.routers().to_vec();
    ranked.sort_by(|a, b| key(*b).cmp(&key(*a)).then(a.cmp(b)));
    ranked
}
