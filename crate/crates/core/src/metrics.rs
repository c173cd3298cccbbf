//! Hit classification, C-FIB freshness, stale delivery and latency
//! accounting, plus the run report and sweep rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cfib::CfibTable;
use crate::naming::ContentId;
use crate::time::SimTime;
use crate::topology::{Graph, Iface, NodeId};

/// Where the delivered bytes came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Provider,
    /// `diverted`: the request copy that reached the cache had been sent
    /// through at least one breadcrumb interface.
    Cache {
        node: NodeId,
        diverted: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Provider,
    OnPath,
    OffPath,
    /// Cache hit on a version older than the client was authorized for.
    Stale,
}

pub fn classify(source: Source, stale: bool) -> Outcome {
    match source {
        Source::Provider => Outcome::Provider,
        Source::Cache { .. } if stale => Outcome::Stale,
        Source::Cache { diverted: true, .. } => Outcome::OffPath,
        Source::Cache { diverted: false, .. } => Outcome::OnPath,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub rid: u64,
    pub client: NodeId,
    pub object: u32,
    pub chunk: u32,
    pub outcome: Outcome,
    pub server: Option<NodeId>,
    pub diverted: bool,
    pub hops: u32,
    pub latency: SimTime,
    pub measured: bool,
}

/// Read access to the network state needed by freshness sampling.
pub trait NetworkView {
    fn graph(&self) -> &Graph;
    fn cfib(&self, node: NodeId) -> Option<&CfibTable>;
    fn cache_holds(&self, node: NodeId, cid: &ContentId) -> bool;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreshnessSample {
    pub time: SimTime,
    /// Entries with at least one breadcrumb.
    pub total: u64,
    pub fresh: u64,
    /// `hist[d - 1]`: fresh entries whose nearest copy is `d` hops away.
    pub hist: Vec<u64>,
}

impl FreshnessSample {
    pub fn ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.fresh as f64 / self.total as f64)
    }
}

/// Hop distance to the nearest cached copy reachable by following
/// breadcrumbs from `node` out of `via`, if within `h` hops.
fn breadcrumb_distance(view: &dyn NetworkView, cid: &ContentId, node: NodeId, via: Iface, h: usize) -> Option<usize> {
    let g = view.graph();
    let mut frontier = vec![(node, via)];
    for d in 1..=h {
        let mut next = Vec::new();
        for (at, out) in frontier {
            let peer = g.link(at, out).peer;
            if view.cache_holds(peer, cid) {
                return Some(d);
            }
            let Some(entry) = view.cfib(peer).and_then(|t| t.get(cid)) else { continue };
            let back = g.iface_towards(peer, at);
            for ti in entry.if_ti.iter() {
                if Some(ti) != back {
                    next.push((peer, ti));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    None
}

pub fn sample_freshness(view: &dyn NetworkView, h: usize, time: SimTime) -> FreshnessSample {
    let mut s = FreshnessSample { time, hist: vec![0; h], ..Default::default() };
    for &r in view.graph().routers() {
        let Some(table) = view.cfib(r) else { continue };
        for e in table.entries() {
            if e.if_ti.is_empty() {
                continue;
            }
            s.total += 1;
            let best = e.if_ti.iter().filter_map(|ti| breadcrumb_distance(view, &e.cid, r, ti, h)).min();
            if let Some(d) = best {
                s.fresh += 1;
                s.hist[d - 1] += 1;
            }
        }
    }
    s
}

/// Per-run accumulator.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub requests: u64,
    pub provider: u64,
    pub on_path: u64,
    pub off_path: u64,
    pub stale: u64,
    pub latency_us: u64,
    pub hops: u64,
    pub freshness: Vec<FreshnessSample>,
}

impl RunMetrics {
    pub fn record(&mut self, r: &HitRecord) {
        if !r.measured {
            return;
        }
        self.requests += 1;
        match r.outcome {
            Outcome::Provider => self.provider += 1,
            Outcome::OnPath => self.on_path += 1,
            Outcome::OffPath => self.off_path += 1,
            Outcome::Stale => self.stale += 1,
        }
        self.latency_us += r.latency.0;
        self.hops += u64::from(r.hops);
    }

    fn frac(&self, n: u64) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            n as f64 / self.requests as f64
        }
    }

    /// Every cache hit, stale or not.
    pub fn hit_ratio(&self) -> f64 {
        self.frac(self.on_path + self.off_path + self.stale)
    }

    /// Cache hits that delivered the authorized version.
    pub fn useful_hit_ratio(&self) -> f64 {
        self.frac(self.on_path + self.off_path)
    }

    /// Fresh-only accounting: stale deliveries count as misses.
    pub fn count_stale_as_misses(&mut self) {
        self.provider += self.stale;
        self.stale = 0;
    }

    pub fn on_path_ratio(&self) -> f64 {
        self.frac(self.on_path)
    }

    pub fn off_path_ratio(&self) -> f64 {
        self.frac(self.off_path)
    }

    pub fn stale_ratio(&self) -> f64 {
        self.frac(self.stale)
    }

    pub fn provider_ratio(&self) -> f64 {
        self.frac(self.provider)
    }

    pub fn mean_latency_ms(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.latency_us as f64 / self.requests as f64 / 1000.0
        }
    }

    /// Mean of the per-sample freshness ratios.
    pub fn mean_freshness(&self) -> f64 {
        let v: Vec<f64> = self.freshness.iter().filter_map(|s| s.ratio()).collect();
        mean(&v)
    }

    pub fn freshness_stderr(&self) -> f64 {
        let v: Vec<f64> = self.freshness.iter().filter_map(|s| s.ratio()).collect();
        stderr(&v)
    }

    /// Pooled histogram of fresh-entry distances.
    pub fn freshness_hist(&self) -> Vec<u64> {
        let h = self.freshness.iter().map(|s| s.hist.len()).max().unwrap_or(0);
        let mut out = vec![0; h];
        for s in &self.freshness {
            for (i, c) in s.hist.iter().enumerate() {
                out[i] += c;
            }
        }
        out
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Standard error of the mean; 0 for fewer than two values.
pub fn stderr(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

/// Mean and standard error over seeds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(v: &[f64]) -> Stat {
        Stat { mean: mean(v), stderr: stderr(v) }
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // ties share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut num = 0.0;
    let (mut dx, mut dy) = (0.0, 0.0);
    for i in 0..rx.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx).powi(2);
        dy += (ry[i] - my).powi(2);
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}

/// Labels identifying one run in sweep output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLabels {
    pub topology: String,
    pub strategy: String,
    pub policy: String,
    pub ratio: f64,
    pub alpha: f64,
    pub seed: u64,
}

pub const SWEEP_HEADER: &str =
    "topology,strategy,policy,ratio,alpha,seed,hit_total,hit_on,hit_off,freshness,stale,latency_ms";

pub fn sweep_row(l: &RunLabels, m: &RunMetrics) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}",
        l.topology,
        l.strategy,
        l.policy,
        l.ratio,
        l.alpha,
        l.seed,
        m.hit_ratio(),
        m.on_path_ratio(),
        m.off_path_ratio(),
        m.mean_freshness(),
        m.stale_ratio(),
        m.mean_latency_ms()
    );
    s
}

/// Fixed-schema JSON document for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub labels: RunLabels,
    pub requests: u64,
    pub hit_ratio: f64,
    pub useful_hit_ratio: f64,
    pub on_path: f64,
    pub off_path: f64,
    pub provider: f64,
    pub stale_ratio: f64,
    pub mean_latency_ms: f64,
    pub mean_hops: f64,
    pub freshness: f64,
    pub freshness_stderr: f64,
    pub freshness_samples: usize,
    pub freshness_hist: Vec<u64>,
    pub cfib_occupancy: f64,
    pub cfib_bytes_per_entry: usize,
}

pub fn report(labels: RunLabels, m: &RunMetrics, cfib_occupancy: f64) -> Report {
    Report {
        labels,
        requests: m.requests,
        hit_ratio: m.hit_ratio(),
        useful_hit_ratio: m.useful_hit_ratio(),
        on_path: m.on_path_ratio(),
        off_path: m.off_path_ratio(),
        provider: m.provider_ratio(),
        stale_ratio: m.stale_ratio(),
        mean_latency_ms: m.mean_latency_ms(),
        mean_hops: if m.requests == 0 { 0.0 } else { m.hops as f64 / m.requests as f64 },
        freshness: m.mean_freshness(),
        freshness_stderr: m.freshness_stderr(),
        freshness_samples: m.freshness.len(),
        freshness_hist: m.freshness_hist(),
        cfib_occupancy,
        cfib_bytes_per_entry: CfibTable::bytes_per_entry(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(outcome: Outcome, measured: bool) -> HitRecord {
        HitRecord {
            rid: 0,
            client: NodeId(0),
            object: 0,
            chunk: 0,
            outcome,
            server: None,
            diverted: false,
            hops: 2,
            latency: SimTime::from_ms(4.0),
            measured,
        }
    }

    #[test]
    fn classification() {
        let on = Source::Cache { node: NodeId(1), diverted: false };
        let off = Source::Cache { node: NodeId(1), diverted: true };
        assert_eq!(classify(on, false), Outcome::OnPath);
        assert_eq!(classify(off, false), Outcome::OffPath);
        assert_eq!(classify(off, true), Outcome::Stale);
        assert_eq!(classify(Source::Provider, false), Outcome::Provider);
    }

    #[test]
    fn fractions_sum_to_one_and_warmup_is_ignored() {
        let mut m = RunMetrics::default();
        for o in [Outcome::Provider, Outcome::OnPath, Outcome::OffPath, Outcome::Stale, Outcome::OnPath] {
            m.record(&rec(o, true));
        }
        m.record(&rec(Outcome::OnPath, false));
        assert_eq!(m.requests, 5);
        let sum = m.provider_ratio() + m.on_path_ratio() + m.off_path_ratio() + m.stale_ratio();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((m.hit_ratio() - 0.8).abs() < 1e-12);
        assert!((m.useful_hit_ratio() - 0.6).abs() < 1e-12);
        assert!((m.mean_latency_ms() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_run_reports_zero() {
        let m = RunMetrics::default();
        assert_eq!(m.hit_ratio(), 0.0);
        assert_eq!(m.mean_freshness(), 0.0);
    }

    #[test]
    fn spearman_oracles() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // textbook example with d^2 sum = 4 over n = 5: 1 - 6*4/(5*24) = 0.8
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]) - 0.8).abs() < 1e-12);
        // ties get average ranks
        let r = ranks(&[5.0, 1.0, 5.0]);
        assert_eq!(r, vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn stderr_oracle() {
        // sample sd of {1,2,3,4} is sqrt(5/3); divided by 2
        assert!((stderr(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(stderr(&[3.0]), 0.0);
    }

    #[test]
    fn sweep_row_shape() {
        let row = sweep_row(&RunLabels::default(), &RunMetrics::default());
        assert_eq!(row.split(',').count(), SWEEP_HEADER.split(',').count());
    }
}
