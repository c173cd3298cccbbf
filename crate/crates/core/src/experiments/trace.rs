//! The three-router walk-through: A then B fetch `x1`, then both fetch
//! `x2` at once. Emits every change of the C-FIB rows at R1 and R3.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ExperimentError, FIG2_TOPOLOGY};
use crate::engine::{SimConfig, Simulator};
use crate::node::NodeConfig;
use crate::time::SimTime;
use crate::topology::{Graph, NodeId, NodeRole, RoleMap};
use crate::workload::{Arrivals, Fetch};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub time: SimTime,
    pub router: String,
    /// `x1` or `x2`.
    pub object: String,
    pub if_i: String,
    pub if_o: String,
    pub if_ti: String,
    pub mip: String,
}

impl TraceRow {
    /// `(if_I, if_O, if_TI, mIP)` with sets comma separated.
    pub fn tuple(&self) -> String {
        let f = |s: &str| s.replace(' ', ",");
        format!("({}|{}|{}|{})", self.if_i, f(&self.if_o), f(&self.if_ti), f(&self.mip))
    }
}

/// Runs the scenario on `graph` (must provide R1, R3, A, B and one provider).
pub fn run_trace_on(graph: Graph) -> Result<Vec<TraceRow>, ExperimentError> {
    let id = |n: &str| {
        graph.id(n).ok_or_else(|| ExperimentError::Config {
            key: "topology".into(),
            msg: format!("trace topology lacks node `{n}`"),
        })
    };
    let (r1, r3, a, b) = (id("R1")?, id("R3")?, id("A")?, id("B")?);
    let mut roles = RoleMap::plain(&graph);
    for &r in graph.routers() {
        roles.0[r.index()] = NodeRole { has_cache: true, has_cfib: true, cache_capacity: 16, cfib_capacity: 16 };
    }
    let cfg = SimConfig {
        node: NodeConfig { chunk_duration: SimTime::from_ms(5.0), ..NodeConfig::default() },
        catalog_size: 2,
        chunks_per_object: 1,
        arrivals: Arrivals::Poisson { rate: 1.0 },
        freshness_every: 0,
        watch: vec![r1, r3],
        ..SimConfig::default()
    };
    let fetch =
        |ms: f64, client: NodeId, object: u32| Fetch { time: SimTime::from_ms(ms), client, object, measured: true };
    let fetches = vec![fetch(0.0, a, 0), fetch(50.0, b, 0), fetch(100.0, a, 1), fetch(100.0, b, 1)];
    let sim = Simulator::new(graph.clone(), &roles, cfg, fetches, 0)?;
    let cp = graph.providers()[0];
    let provider = sim.provider_at(cp).expect("provider host");
    let mut names = BTreeMap::new();
    for obj in 0..2u32 {
        let (cid, _) = provider.current(obj, 0).expect("catalog object");
        names.insert(cid.to_hex(), format!("x{}", obj + 1));
    }
    let out = sim.run()?;

    let host_name = |tok: &str| {
        tok.strip_prefix('n')
            .and_then(|n| n.parse::<u32>().ok())
            .map_or(tok.to_string(), |n| graph.name(NodeId(n)).to_string())
    };
    let mut last: BTreeMap<(NodeId, String), String> = BTreeMap::new();
    let mut rows = Vec::new();
    for snap in &out.snapshots {
        for line in &snap.rows {
            let cols: Vec<&str> = line.split(',').collect();
            let Some(object) = names.get(cols[0]) else { continue };
            let mip = if cols[4] == "-" {
                "-".to_string()
            } else {
                cols[4].split(' ').map(host_name).collect::<Vec<_>>().join(" ")
            };
            let row = TraceRow {
                time: snap.time,
                router: graph.name(snap.node).to_string(),
                object: object.clone(),
                if_i: cols[1].to_string(),
                if_o: cols[2].to_string(),
                if_ti: cols[3].to_string(),
                mip,
            };
            let key = (snap.node, object.clone());
            if last.get(&key) != Some(&row.tuple()) {
                last.insert(key, row.tuple());
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn run_trace() -> Result<Vec<TraceRow>, ExperimentError> {
    run_trace_on(Graph::parse(FIG2_TOPOLOGY)?)
}

/// `time_ms,router,cid,if_I,if_O,if_TI,mIP`, sets space separated.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("time_ms,router,cid,if_I,if_O,if_TI,mIP\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.time.as_ms(), r.router, r.object, r.if_i, r.if_o, r.if_ti, r.mip);
    }
    s
}
