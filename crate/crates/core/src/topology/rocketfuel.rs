//! Conversion of RocketFuel measured ISP maps (`.cch` adjacency lists) into
//! topology documents. Every link gets a unit latency.
//!
//! A `.cch` line looks like
//! `12 @Sydney,+Australia + bb (3) &2 -> <7> <19> <40> {-1} =syd1.isp.net r1`;
//! negative uids and `{..}` entries denote external peers and are dropped.

use std::collections::{BTreeMap, BTreeSet};

use super::{Graph, TopologyError};

/// Where hosts are attached when a topology is emitted from a bare router graph.
#[derive(Debug, Clone)]
pub struct AttachOptions {
    /// Routers with core degree <= this get one client each.
    pub client_max_degree: usize,
    /// Number of providers; the catalog is partitioned among them.
    pub providers: usize,
}

impl Default for AttachOptions {
    fn default() -> Self {
        AttachOptions { client_max_degree: 1, providers: 1 }
    }
}

/// Router-only graph used by converters and generators before hosts are
/// attached. Router names are emitted in index order.
#[derive(Debug, Clone, Default)]
pub struct CoreGraph {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl CoreGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.names.len()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Renders the document with clients and providers attached.
    pub fn to_document(&self, opts: &AttachOptions) -> String {
        let deg = self.degrees();
        let mut clients: Vec<usize> = (0..deg.len()).filter(|&i| deg[i] <= opts.client_max_degree).collect();
        if clients.is_empty() {
            let min = deg.iter().copied().min().unwrap_or(0);
            clients = (0..deg.len()).filter(|&i| deg[i] == min).collect();
        }
        let client_set: BTreeSet<usize> = clients.iter().copied().collect();
        // providers on low-degree transit routers, spread evenly over ids
        let mut candidates: Vec<usize> = (0..deg.len()).filter(|&i| deg[i] == 2 && !client_set.contains(&i)).collect();
        if candidates.len() < opts.providers {
            let mut rest: Vec<usize> = (0..deg.len()).filter(|i| !client_set.contains(i)).collect();
            rest.sort_by_key(|&i| (deg[i], i));
            candidates = rest;
        }
        let k = opts.providers.max(1).min(candidates.len().max(1));
        let providers: Vec<usize> = (0..k).filter_map(|j| candidates.get(j * candidates.len() / k).copied()).collect();

        let mut out = String::new();
        for n in &self.names {
            out.push_str(&format!("node {n}\n"));
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("edge {} {} 1\n", self.names[a], self.names[b]));
        }
        for (i, &c) in clients.iter().enumerate() {
            out.push_str(&format!("client c{i} @ {}\n", self.names[c]));
        }
        for (i, &p) in providers.iter().enumerate() {
            out.push_str(&format!("provider cp{i} @ {}\n", self.names[p]));
        }
        out
    }

    pub fn to_graph(&self, opts: &AttachOptions) -> Result<Graph, TopologyError> {
        Graph::parse(&self.to_document(opts))
    }
}

/// Parses a RocketFuel `.cch` file into a router graph.
pub fn parse_cch(text: &str) -> Result<CoreGraph, TopologyError> {
    let mut adjacency: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let uid: i64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| TopologyError::Parse { line: idx + 1, msg: format!("missing uid: `{line}`") })?;
        if uid < 0 {
            continue;
        }
        let neigh = toks
            .filter(|t| t.starts_with('<') && t.ends_with('>'))
            .filter_map(|t| t[1..t.len() - 1].parse::<i64>().ok())
            .filter(|&n| n >= 0)
            .collect();
        adjacency.insert(uid, neigh);
    }
    let index: BTreeMap<i64, usize> = adjacency.keys().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut edges = BTreeSet::new();
    for (&u, ns) in &adjacency {
        for n in ns {
            if let Some(&j) = index.get(n) {
                let i = index[&u];
                if i != j {
                    edges.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    Ok(CoreGraph { names: adjacency.keys().map(|u| format!("r{u}")).collect(), edges: edges.into_iter().collect() })
}

/// Converts `.cch` text straight to a topology document.
pub fn convert_cch(text: &str, opts: &AttachOptions) -> Result<String, TopologyError> {
    let core = parse_cch(text)?;
    let doc = core.to_document(opts);
    // validate before handing it out
    Graph::parse(&doc)?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
1 @Sydney,+Australia + bb (3) &1 -> <2> <3> <4> {-1} =syd1 r0
2 @Sydney,+Australia (1) -> <1> =syd2 r1
3 @Perth,+Australia (2) -> <1> <4> =per1 r1
4 @Melbourne,+Australia bb (2) -> <1> <3> =mel1 r1
-1 =external r0
";

    #[test]
    fn parses_adjacency_and_drops_externals() {
        let core = parse_cch(SAMPLE).unwrap();
        assert_eq!(core.names, vec!["r1", "r2", "r3", "r4"]);
        assert_eq!(core.edges, vec![(0, 1), (0, 2), (0, 3), (2, 3)]);
    }

    #[test]
    fn converted_document_is_valid() {
        let doc = convert_cch(SAMPLE, &AttachOptions::default()).unwrap();
        let g = Graph::parse(&doc).unwrap();
        assert_eq!(g.routers().len(), 4);
        // r2 is the only degree-1 router
        assert_eq!(g.clients().len(), 1);
        assert_eq!(g.attachment(g.clients()[0]).0, g.id("r2").unwrap());
        assert_eq!(g.providers().len(), 1);
    }
}
