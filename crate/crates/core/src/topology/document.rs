//! Line-oriented topology document:
//!
//! ```text
//! # comment
//! node R1
//! edge R1 R2 1
//! client A @ R1
//! provider CP @ R2
//! ```
//!
//! Interfaces are numbered per node in the order `edge`/`client`/`provider`
//! lines mention that node. Access links default to 1 ms; an optional
//! trailing number overrides it.

use super::{Graph, GraphBuilder, NodeKind, TopologyError};
use crate::time::SimTime;

const DEFAULT_LATENCY_MS: f64 = 1.0;

fn parse_latency(tok: Option<&str>, line: usize) -> Result<SimTime, TopologyError> {
    match tok {
        None => Ok(SimTime::from_ms(DEFAULT_LATENCY_MS)),
        Some(t) => {
            let v: f64 = t.parse().map_err(|_| TopologyError::Parse { line, msg: format!("bad latency `{t}`") })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(TopologyError::Parse { line, msg: format!("latency must be positive, got `{t}`") });
            }
            Ok(SimTime::from_ms(v))
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Graph, TopologyError> {
    let mut b = GraphBuilder::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let bad = |msg: &str| TopologyError::Parse { line, msg: format!("{msg}: `{content}`") };
        match toks[0] {
            "node" => {
                if toks.len() != 2 {
                    return Err(bad("expected `node <id>`"));
                }
                b.router(toks[1])?;
            }
            "edge" => {
                if !(3..=4).contains(&toks.len()) {
                    return Err(bad("expected `edge <id> <id> <latency_ms>`"));
                }
                let lat = parse_latency(toks.get(3).copied(), line)?;
                b.edge(toks[1], toks[2], lat)?;
            }
            kind @ ("client" | "provider") => {
                if !(4..=5).contains(&toks.len()) || toks[2] != "@" {
                    return Err(bad(&format!("expected `{kind} <id> @ <router-id>`")));
                }
                let lat = parse_latency(toks.get(4).copied(), line)?;
                if kind == "client" {
                    b.client(toks[1], toks[3], lat)?;
                } else {
                    b.provider(toks[1], toks[3], lat)?;
                }
            }
            other => return Err(bad(&format!("unknown directive `{other}`"))),
        }
    }
    b.build()
}

fn fmt_ms(t: SimTime) -> String {
    let ms = t.as_ms();
    if ms.fract() == 0.0 {
        format!("{}", ms as u64)
    } else {
        format!("{ms}")
    }
}

/// Emits a document that re-parses into the same graph, interface numbering
/// included: links are written in global creation order.
pub(super) fn render(g: &Graph) -> String {
    let mut out = String::new();
    for &r in g.routers() {
        out.push_str(&format!("node {}\n", g.name(r)));
    }
    // Recover creation order: a link (a,b) was created when both ends got the
    // next free slot, so replay slots greedily in increasing order.
    let n = g.node_count();
    let mut cursor = vec![0usize; n];
    let mut emitted = 0usize;
    let total: usize = (0..n).map(|i| g.links[i].len()).sum::<usize>() / 2;
    while emitted < total {
        let mut progressed = false;
        for a in 0..n {
            while cursor[a] < g.links[a].len() {
                let l = g.links[a][cursor[a]];
                let b = l.peer.index();
                let back = g.links[b].iter().position(|x| x.peer.index() == a).unwrap();
                if cursor[b] != back {
                    break;
                }
                let (ka, kb) = (g.kinds[a], g.kinds[b]);
                match (ka, kb) {
                    (NodeKind::Router, NodeKind::Router) => {
                        out.push_str(&format!("edge {} {} {}\n", g.names[a], g.names[b], fmt_ms(l.latency)))
                    }
                    (NodeKind::Router, host) | (host, NodeKind::Router) => {
                        let (h, r) = if ka == NodeKind::Router { (b, a) } else { (a, b) };
                        let word = if host == NodeKind::Client { "client" } else { "provider" };
                        out.push_str(&format!("{word} {} @ {} {}\n", g.names[h], g.names[r], fmt_ms(l.latency)));
                    }
                    _ => unreachable!("hosts only attach to routers"),
                }
                cursor[a] += 1;
                cursor[b] += 1;
                emitted += 1;
                progressed = true;
            }
        }
        assert!(progressed, "link order is not replayable");
    }
    out
}
