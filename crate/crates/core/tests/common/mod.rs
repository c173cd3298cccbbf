//! Independent oracles shared by the integration targets.

#![allow(dead_code)]

use std::collections::VecDeque;

use lira::cache::{CacheReplacement, ContentStore, Lookup, StoreMode};
use lira::cfib::{CfibTable, Replacement};
use lira::naming::{ChunkDescriptor, ContentId, ServiceOptions, PADDING_LEN};
use lira::time::SimTime;
use lira::topology::{betweenness, Graph, GraphBuilder, Iface, NodeId};
use lira::workload::Zipf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cid(n: u32) -> ContentId {
    let mut digest = [0; 32];
    digest[..4].copy_from_slice(&n.to_le_bytes());
    ContentId { service_options: ServiceOptions::EMPTY, digest }
}

fn chunk(n: u32) -> ChunkDescriptor {
    ChunkDescriptor { object_id: n, chunk_index: 0, version: 0, padding: [0; PADDING_LEN] }
}

/// Replays `trace` against a store and a vector-based recency list.
/// Returns the first mismatch.
pub fn replay_lru(trace: &[u32], cap: usize) -> Result<u64, String> {
    let mut store = ContentStore::new(cap, StoreMode::Lira, CacheReplacement::Lru);
    let mut order: Vec<u32> = Vec::new();
    let mut hits = 0;
    for (i, &k) in trace.iter().enumerate() {
        let got = match store.lookup(&cid(k), SimTime::ZERO) {
            Lookup::Hit { .. } => true,
            Lookup::Miss => {
                store.admit(cid(k), chunk(k), SimTime::ZERO);
                false
            }
        };
        let want = match order.iter().position(|&x| x == k) {
            Some(p) => {
                order.remove(p);
                order.push(k);
                true
            }
            None => {
                if cap > 0 {
                    if order.len() == cap {
                        order.remove(0);
                    }
                    order.push(k);
                }
                false
            }
        };
        if got != want {
            return Err(format!("capacity {cap}: request {i} for {k} hit={got}, oracle {want}"));
        }
        hits += u64::from(got);
    }
    let contents: Vec<ContentId> = store.cids().collect();
    let expect: Vec<ContentId> = order.iter().map(|&k| cid(k)).collect();
    if contents != expect {
        return Err(format!("capacity {cap}: final contents differ"));
    }
    Ok(hits)
}

pub fn zipf_trace(n: usize, objects: u32, alpha: f64, seed: u64) -> Vec<u32> {
    let z = Zipf::new(alpha, objects).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| z.sample(&mut rng)).collect()
}

/// Asymptotic Kolmogorov survival function.
pub fn kolmogorov_p(lambda: f64) -> f64 {
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS statistic of sampled ranks against the closed-form pmf
/// k^-alpha / H(n, alpha). Returns (D, p).
pub fn zipf_ks(alpha: f64, n: u32, samples: usize, seed: u64) -> (f64, f64) {
    let z = Zipf::new(alpha, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; n as usize + 1];
    for _ in 0..samples {
        counts[z.sample(&mut rng) as usize] += 1;
    }
    let norm: f64 = (1..=n).map(|k| (k as f64).powf(-alpha)).sum();
    let (mut emp, mut cdf, mut d) = (0.0, 0.0, 0.0f64);
    for (k, &c) in counts.iter().enumerate().skip(1) {
        emp += c as f64 / samples as f64;
        cdf += (k as f64).powf(-alpha) / norm;
        d = d.max((emp - cdf).abs());
    }
    (d, kolmogorov_p((samples as f64).sqrt() * d))
}

/// Random insert-like operations on a FIFO C-FIB checked against a queue
/// of first insertions.
pub fn cfib_fifo_vs_queue(ops: usize, cap: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = CfibTable::new(cap, Replacement::Fifo);
    let mut queue: VecDeque<u32> = VecDeque::new();
    for i in 0..ops {
        let c = rng.random_range(0..3 * cap as u32 + 2);
        let a = Iface(rng.random_range(1..5));
        let inserted = match rng.random_range(0..5) {
            0 => {
                let b = Iface(a.0 % 4 + 1);
                t.on_request_forwarded(cid(c), a, b);
                true
            }
            1 => {
                t.on_local_serve(cid(c), a, Some(Iface(9)));
                true
            }
            2 => {
                let _ = t.on_request_suppressed(cid(c), a, NodeId(0));
                false
            }
            3 => {
                t.on_eoc(&cid(c));
                false
            }
            _ => {
                t.prune(&cid(c), a);
                false
            }
        };
        if inserted && !queue.contains(&c) {
            if queue.len() == cap {
                queue.pop_front();
            }
            queue.push_back(c);
        }
        let live: Vec<ContentId> = t.entries().map(|e| e.cid).collect();
        let want: Vec<ContentId> = queue.iter().map(|&k| cid(k)).collect();
        if live != want {
            return Err(format!("capacity {cap}: operation {i} leaves a different table"));
        }
    }
    Ok(())
}

/// Connected random router graph with integer millisecond latencies in
/// 1..=3, so equal-length paths are common.
pub fn random_graph(routers: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    for i in 0..routers {
        b.router(&format!("r{i}")).unwrap();
    }
    let mut edges = Vec::new();
    for v in 1..routers {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    for _ in 0..extra {
        let (u, v) = (rng.random_range(0..routers), rng.random_range(0..routers));
        let e = (u.min(v), u.max(v));
        if u != v && !edges.contains(&e) {
            edges.push(e);
        }
    }
    for (u, v) in edges {
        let ms = rng.random_range(1..=3) as f64;
        b.edge(&format!("r{u}"), &format!("r{v}"), SimTime::from_ms(ms)).unwrap();
    }
    b.provider("cp", "r0", SimTime::from_ms(1.0)).unwrap();
    b.build().unwrap()
}

/// Betweenness by listing every simple path between every router pair and
/// keeping the shortest ones.
pub fn betweenness_by_enumeration(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let routers = g.routers();
    let mut bc = vec![0.0; n];
    for (i, &s) in routers.iter().enumerate() {
        for &t in &routers[i + 1..] {
            let mut shortest: Vec<Vec<NodeId>> = Vec::new();
            let mut best = u64::MAX;
            let mut path = vec![s];
            let mut on_path = vec![false; n];
            on_path[s.index()] = true;
            walk(g, t, &mut path, &mut on_path, 0, &mut best, &mut shortest);
            let total = shortest.len() as f64;
            for p in &shortest {
                for v in &p[1..p.len() - 1] {
                    bc[v.index()] += 1.0 / total;
                }
            }
        }
    }
    bc
}

fn walk(
    g: &Graph,
    t: NodeId,
    path: &mut Vec<NodeId>,
    on_path: &mut [bool],
    len: u64,
    best: &mut u64,
    shortest: &mut Vec<Vec<NodeId>>,
) {
    if len > *best {
        return;
    }
    let v = *path.last().unwrap();
    if v == t {
        if len < *best {
            *best = len;
            shortest.clear();
        }
        shortest.push(path.clone());
        return;
    }
    for l in g.links(v) {
        if !g.is_router(l.peer) || on_path[l.peer.index()] {
            continue;
        }
        on_path[l.peer.index()] = true;
        path.push(l.peer);
        walk(g, t, path, on_path, len + l.latency.0, best, shortest);
        path.pop();
        on_path[l.peer.index()] = false;
    }
}

/// Compares the library's betweenness with the enumeration oracle on the
/// bundled micro topology and `count` random graphs of 2..=12 routers.
pub fn betweenness_suite(count: u64) -> Result<usize, String> {
    let mut graphs = vec![Graph::parse(lira::experiments::FIG2_TOPOLOGY).unwrap()];
    for seed in 0..count {
        let routers = 2 + (seed % 11) as usize;
        graphs.push(random_graph(routers, (seed % 7) as usize, seed));
    }
    for (i, g) in graphs.iter().enumerate() {
        let got = betweenness(g);
        let want = betweenness_by_enumeration(g);
        for &r in g.routers() {
            if (got[r.index()] - want[r.index()]).abs() > 1e-9 {
                return Err(format!(
                    "graph {i}: router {} has {} vs oracle {}",
                    g.name(r),
                    got[r.index()],
                    want[r.index()]
                ));
            }
        }
    }
    Ok(graphs.len())
}

/// Published C-FIB rows of R1 and R3 as (object, tuple), in table order.
pub const R1_ROWS: [(&str, &str); 7] = [
    ("x1", "(1|3|-|-)"),
    ("x1", "(1|-|3|-)"),
    ("x1", "(1|2|3|-)"),
    ("x1", "(1|-|2,3|-)"),
    ("x2", "(1|3|-|-)"),
    ("x2", "(1|2,3|-|B)"),
    ("x2", "(1|-|2,3|-)"),
];
pub const R3_ROWS: [(&str, &str); 4] =
    [("x1", "(1|2|-|-)"), ("x1", "(1|-|2|-)"), ("x2", "(1|2|-|-)"), ("x2", "(1|-|2|-)")];

/// Table labels t1..t10 of the rows above, in the same order.
pub const R1_LABELS: [u32; 7] = [1, 2, 4, 5, 7, 9, 10];
pub const R3_LABELS: [u32; 4] = [3, 6, 8, 10];

pub fn rows_of(rows: &[lira::experiments::trace::TraceRow], router: &str) -> Vec<(String, String)> {
    rows.iter().filter(|r| r.router == router).map(|r| (r.object.clone(), r.tuple())).collect()
}

pub fn expected(rows: &[(&str, &str)]) -> Vec<(String, String)> {
    rows.iter().map(|(o, t)| (o.to_string(), t.to_string())).collect()
}

pub const STAR: &str = "\
node R0
node R1
node E1
node E2
node E3
edge R0 R1 5
edge R1 E1 1
edge R1 E2 2
edge R1 E3 3
provider CP @ R0
client c0 @ E1
client c1 @ E1
client c2 @ E1
client c3 @ E1
client c4 @ E2
client c5 @ E2
client c6 @ E2
client c7 @ E3
client c8 @ E3
client c9 @ E3
";

/// Data counts on the links of [`STAR`] after ten clients ask for the same
/// chunk at once, plus the number of delivered records.
pub struct MulticastOutcome {
    pub cp_to_r0: u64,
    pub r0_to_r1: u64,
    pub r1_to_edges: [u64; 3],
    pub deliveries: usize,
    pub distinct_clients: usize,
    pub timeouts: u64,
}

pub fn multicast_scenario() -> MulticastOutcome {
    use lira::engine::{SimConfig, Simulator};
    use lira::node::NodeConfig;
    use lira::topology::{NodeRole, RoleMap};
    use lira::workload::{Arrivals, Fetch};

    let g = Graph::parse(STAR).unwrap();
    let mut roles = RoleMap::plain(&g);
    for &r in g.routers() {
        roles.0[r.index()] = NodeRole { has_cache: true, has_cfib: true, cache_capacity: 8, cfib_capacity: 64 };
    }
    let cfg = SimConfig {
        node: NodeConfig { chunk_duration: SimTime::from_ms(40.0), ..NodeConfig::default() },
        catalog_size: 4,
        chunks_per_object: 1,
        arrivals: Arrivals::Poisson { rate: 1.0 },
        freshness_every: 0,
        keep_records: true,
        ..SimConfig::default()
    };
    let fetches: Vec<Fetch> =
        g.clients().iter().map(|&c| Fetch { time: SimTime::ZERO, client: c, object: 2, measured: true }).collect();
    let mut sim = Simulator::new(g.clone(), &roles, cfg, fetches, 7).unwrap();
    sim.run_until(SimTime::from_secs(1.0)).unwrap();
    let id = |n: &str| g.id(n).unwrap();
    let r1_to_edges = ["E1", "E2", "E3"].map(|e| sim.data_on_link(id("R1"), id(e)));
    let (cp_to_r0, r0_to_r1) = (sim.data_on_link(id("CP"), id("R0")), sim.data_on_link(id("R0"), id("R1")));
    let out = sim.run().unwrap();
    let mut clients: Vec<_> = out.records.iter().map(|r| r.client).collect();
    clients.sort_unstable();
    clients.dedup();
    MulticastOutcome {
        cp_to_r0,
        r0_to_r1,
        r1_to_edges,
        deliveries: out.records.len(),
        distinct_clients: clients.len(),
        timeouts: out.counters.get("Timeouts").copied().unwrap_or(0),
    }
}

/// Request hops simulated and directed links revisited by a request
/// lineage, on the Telstra-scale graph with a 20 ms chunk duration.
pub fn loop_scenario() -> (u64, u64) {
    use lira::engine::{rng_stream, SimConfig, Simulator};
    use lira::experiments::{prepare, resolve_topology, workload_config, ExperimentConfig};

    let cfg = ExperimentConfig {
        chunk_ms: 20.0,
        catalog_size: 2000,
        warmup: 0,
        measure: 45_000,
        ..ExperimentConfig::default()
    };
    let g = resolve_topology("telstra").unwrap();
    let p = prepare(&cfg, &g, 11).unwrap();
    let fetches =
        lira::workload::generate(&workload_config(&cfg), g.clients(), &mut rng_stream(11, "workload")).unwrap();
    let sim = SimConfig { check_loops: true, ..p.sim };
    let out = Simulator::new(g, &p.roles, sim, fetches, 11).unwrap().run().unwrap();
    (out.message_hops, out.loop_violations)
}

pub fn determinism_config() -> lira::experiments::ExperimentConfig {
    lira::experiments::ExperimentConfig {
        chunk_ms: 10.0,
        catalog_size: 1000,
        warmup: 1000,
        measure: 3000,
        seeds: vec![4, 9],
        ..Default::default()
    }
}
