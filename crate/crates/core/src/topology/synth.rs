//! Deterministic synthetic ISP-like router graphs with node counts matching
//! the Telstra (108) and Abovenet (141) RocketFuel maps.
//!
//! Construction: a preferential-attachment tree gives a hub-and-spoke access
//! layer, then extra edges mesh the higher-degree core.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rocketfuel::{AttachOptions, CoreGraph};
use super::{Graph, TopologyError};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub name: &'static str,
    pub routers: usize,
    /// Core links added on top of the spanning tree.
    pub extra_edges: usize,
    pub seed: u64,
    pub attach: AttachOptions,
}

pub fn telstra_like() -> SynthSpec {
    SynthSpec {
        name: "telstra108",
        routers: 108,
        extra_edges: 45,
        seed: 1221,
        attach: AttachOptions { client_max_degree: 1, providers: 4 },
    }
}

pub fn abovenet_like() -> SynthSpec {
    SynthSpec {
        name: "abovenet141",
        routers: 141,
        extra_edges: 70,
        seed: 6461,
        attach: AttachOptions { client_max_degree: 1, providers: 4 },
    }
}

pub fn by_name(name: &str) -> Option<SynthSpec> {
    match name {
        "telstra108" | "telstra" => Some(telstra_like()),
        "abovenet141" | "abovenet" => Some(abovenet_like()),
        _ => None,
    }
}

pub fn generate_core(spec: &SynthSpec) -> CoreGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.routers;
    let mut edges = BTreeSet::new();
    let mut deg = vec![0usize; n];
    // preferential attachment tree
    for v in 1..n {
        let total: usize = deg[..v].iter().map(|d| d + 1).sum();
        let mut pick = rng.random_range(0..total);
        let mut u = 0;
        while pick > deg[u] {
            pick -= deg[u] + 1;
            u += 1;
        }
        edges.insert((u, v));
        deg[u] += 1;
        deg[v] += 1;
    }
    // core meshing: both endpoints drawn among non-leaf routers, weighted by degree
    let mut added = 0;
    let mut attempts = 0;
    while added < spec.extra_edges && attempts < 100 * spec.extra_edges.max(1) {
        attempts += 1;
        let core: Vec<usize> = (0..n).filter(|&i| deg[i] >= 2).collect();
        let total: usize = core.iter().map(|&i| deg[i]).sum();
        let mut draw = || {
            let mut pick = rng.random_range(0..total);
            for &i in &core {
                if pick < deg[i] {
                    return i;
                }
                pick -= deg[i];
            }
            unreachable!()
        };
        let (a, b) = (draw(), draw());
        if a == b || edges.contains(&(a.min(b), a.max(b))) {
            continue;
        }
        edges.insert((a.min(b), a.max(b)));
        deg[a] += 1;
        deg[b] += 1;
        added += 1;
    }
    CoreGraph { names: (0..n).map(|i| format!("r{i}")).collect(), edges: edges.into_iter().collect() }
}

pub fn generate(spec: &SynthSpec) -> Result<Graph, TopologyError> {
    generate_core(spec).to_graph(&spec.attach)
}

pub fn document(spec: &SynthSpec) -> String {
    generate_core(spec).to_document(&spec.attach)
}
