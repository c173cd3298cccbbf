//! Canonical parameter sweeps.
//!
//! A study expands the base config into points, runs every (point, seed)
//! pair on a worker pool and returns rows in point-then-seed order so the
//! output only depends on the config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::trace::{run_trace_on, trace_csv};
use super::{resolve_topology, run_on, ExperimentConfig, ExperimentError, RotationMode, TtlMode};
use crate::cache::Admission;
use crate::metrics::{sweep_row, RunLabels, RunMetrics, Stat, SWEEP_HEADER};
use crate::topology::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Deployment,
    Ratio,
    Purging,
    Incremental,
    Trace,
}

impl Study {
    pub const ALL: [Study; 5] = [Study::Deployment, Study::Ratio, Study::Purging, Study::Incremental, Study::Trace];

    pub fn name(self) -> &'static str {
        match self {
            Study::Deployment => "deployment",
            Study::Ratio => "ratio",
            Study::Purging => "purging",
            Study::Incremental => "incremental",
            Study::Trace => "trace",
        }
    }
}

impl FromStr for Study {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Study::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| ExperimentError::UnknownStudy(s.to_string()))
    }
}

pub const RATIOS: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const CACHE_PCTS: [u32; 4] = [25, 50, 75, 100];
pub const CFIB_PCTS: [u32; 11] = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

/// Purging schemes. The two TTL schemes are two accountings of one run.
pub const SCHEMES: [&str; 4] = ["lira_w", "lira_wo", "ttl_all_hits", "ttl_fresh_only"];

/// One sweep point: its config and the extra label columns it adds.
#[derive(Debug, Clone)]
pub struct Point {
    pub cfg: ExperimentConfig,
    pub params: Vec<(&'static str, String)>,
}

fn point(cfg: ExperimentConfig, params: Vec<(&'static str, String)>) -> Point {
    Point { cfg, params }
}

/// Expands `base` into the points of `study`. Trace has no points.
pub fn points(study: Study, base: &ExperimentConfig) -> Vec<Point> {
    let mut out = Vec::new();
    match study {
        Study::Deployment => {
            for s in Strategy::ALL {
                for p in [Admission::Lce, Admission::Choice] {
                    let cfg = ExperimentConfig { strategy: s, policy: p, ..base.clone() };
                    out.push(point(cfg, vec![]));
                }
            }
        }
        Study::Ratio => {
            for r in RATIOS {
                let cfg = ExperimentConfig { strategy: Strategy::ChFa, cfib_ratio: r, ..base.clone() };
                out.push(point(cfg, vec![]));
            }
        }
        Study::Purging => {
            for (scheme, mode) in
                [("lira_w", RotationMode::WithReplacement), ("lira_wo", RotationMode::WithoutReplacement)]
            {
                let cfg = ExperimentConfig { rotation: mode, ttl: vec![], ..base.clone() };
                out.push(point(cfg, vec![("scheme", scheme.into()), ("ttl", "-".into())]));
            }
            for &t in &base.ttl {
                let cfg = ExperimentConfig { rotation: RotationMode::Off, ttl: vec![t], ..base.clone() };
                out.push(point(cfg, vec![("scheme", "ttl".into()), ("ttl", format!("{t}"))]));
            }
        }
        Study::Incremental => {
            for c in CACHE_PCTS {
                for f in CFIB_PCTS {
                    let cfg = ExperimentConfig {
                        cache_fraction: Some(c as f64 / 100.0),
                        cfib_fraction: Some(f as f64 / 100.0),
                        ..base.clone()
                    };
                    out.push(point(cfg, vec![("cache_pct", c.to_string()), ("cfib_pct", f.to_string())]));
                }
            }
        }
        Study::Trace => {}
    }
    out
}

/// Per-run numbers kept for aggregation.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub hit: f64,
    pub useful: f64,
    pub on_path: f64,
    pub off_path: f64,
    pub stale: f64,
    pub freshness: f64,
    pub latency_ms: f64,
    pub cfib_occupancy: f64,
}

impl RunSummary {
    fn of(seed: u64, m: &RunMetrics, occupancy: f64) -> Self {
        RunSummary {
            seed,
            hit: m.hit_ratio(),
            useful: m.useful_hit_ratio(),
            on_path: m.on_path_ratio(),
            off_path: m.off_path_ratio(),
            stale: m.stale_ratio(),
            freshness: m.mean_freshness(),
            latency_ms: m.mean_latency_ms(),
            cfib_occupancy: occupancy,
        }
    }
}

/// Mean and standard error over seeds for one point (and, for TTL
/// points, one accounting).
#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub labels: BTreeMap<String, String>,
    pub seeds: usize,
    pub hit: Stat,
    pub useful: Stat,
    pub on_path: Stat,
    pub off_path: Stat,
    pub stale: Stat,
    pub freshness: Stat,
    pub latency_ms: Stat,
}

impl PointSummary {
    fn of(labels: BTreeMap<String, String>, runs: &[RunSummary]) -> Self {
        let s = |f: fn(&RunSummary) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
        PointSummary {
            labels,
            seeds: runs.len(),
            hit: s(|r| r.hit),
            useful: s(|r| r.useful),
            on_path: s(|r| r.on_path),
            off_path: s(|r| r.off_path),
            stale: s(|r| r.stale),
            freshness: s(|r| r.freshness),
            latency_ms: s(|r| r.latency_ms),
        }
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub study: &'static str,
    #[serde(skip)]
    pub csv: String,
    pub points: Vec<PointSummary>,
}

impl StudyResult {
    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Summaries whose labels contain every `(key, value)` pair.
    pub fn find<'a>(&'a self, want: &'a [(&'a str, &'a str)]) -> impl Iterator<Item = &'a PointSummary> + 'a {
        self.points.iter().filter(move |p| want.iter().all(|(k, v)| p.label(k) == Some(*v)))
    }
}

fn base_labels(l: &RunLabels) -> BTreeMap<String, String> {
    [
        ("topology", l.topology.clone()),
        ("strategy", l.strategy.clone()),
        ("policy", l.policy.clone()),
        ("ratio", l.ratio.to_string()),
        ("alpha", l.alpha.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Runs `study` over every seed in `cfg.seeds`.
pub fn run_study(study: Study, cfg: &ExperimentConfig) -> Result<StudyResult, ExperimentError> {
    cfg.validate()?;
    if cfg.seeds.is_empty() {
        return Err(ExperimentError::Config { key: "seeds".into(), msg: "at least one seed is required".into() });
    }
    if study == Study::Purging && cfg.ttl.is_empty() {
        return Err(ExperimentError::Config { key: "ttl".into(), msg: "the purging study needs a TTL grid".into() });
    }
    if study == Study::Trace {
        let g = resolve_topology(if cfg.topology.is_empty() { "fig2" } else { &cfg.topology })?;
        let rows = run_trace_on(g)?;
        return Ok(StudyResult { study: study.name(), csv: trace_csv(&rows), points: vec![] });
    }

    let graph = resolve_topology(&cfg.topology)?;
    let pts = points(study, cfg);
    let jobs: Vec<(usize, u64)> = (0..pts.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (labels, out) = run_on(&pts[i].cfg, &graph, seed)?;
            Ok((labels, out.metrics, out.cfib_occupancy))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let extra: Vec<&str> = match study {
        Study::Purging => vec!["scheme", "ttl"],
        Study::Incremental => vec!["cache_pct", "cfib_pct"],
        _ => vec![],
    };
    let mut csv = String::from(SWEEP_HEADER);
    for e in &extra {
        csv.push(',');
        csv.push_str(e);
    }
    csv.push('\n');

    let mut points_out = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let mine: Vec<&(RunLabels, RunMetrics, f64)> =
            runs.iter().zip(&jobs).filter(|(_, j)| j.0 == i).map(|(r, _)| r).collect();
        let ttl_point = p.cfg.ttl.len() == 1 && study == Study::Purging;
        let accountings: Vec<Option<TtlMode>> =
            if ttl_point { vec![Some(TtlMode::AllHits), Some(TtlMode::FreshOnly)] } else { vec![None] };
        for acc in accountings {
            let mut params = p.params.clone();
            if let Some(mode) = acc {
                params[0].1 = match mode {
                    TtlMode::AllHits => "ttl_all_hits".into(),
                    TtlMode::FreshOnly => "ttl_fresh_only".into(),
                };
            }
            let mut summaries = Vec::new();
            for (labels, m, occ) in &mine {
                let mut m = (*m).clone();
                if acc == Some(TtlMode::FreshOnly) {
                    m.count_stale_as_misses();
                }
                let _ = write!(csv, "{}", sweep_row(labels, &m));
                for (_, v) in &params {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
                summaries.push(RunSummary::of(labels.seed, &m, *occ));
            }
            let mut labels = base_labels(&mine[0].0);
            labels.extend(params.iter().map(|(k, v)| (k.to_string(), v.clone())));
            points_out.push(PointSummary::of(labels, &summaries));
        }
    }
    Ok(StudyResult { study: study.name(), csv, points: points_out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names_round_trip() {
        for s in Study::ALL {
            assert_eq!(s.name().parse::<Study>().unwrap(), s);
        }
        assert!(matches!("fig9".parse::<Study>(), Err(ExperimentError::UnknownStudy(_))));
    }

    #[test]
    fn grids_have_the_expected_sizes() {
        let mut c = ExperimentConfig::default();
        assert_eq!(points(Study::Deployment, &c).len(), 8);
        assert_eq!(points(Study::Ratio, &c).len(), 8);
        assert_eq!(points(Study::Incremental, &c).len(), 44);
        c.ttl = vec![2.0, 8.0, 30.0];
        assert_eq!(points(Study::Purging, &c).len(), 5);
    }

    #[test]
    fn zero_seeds_is_an_error() {
        let c = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
        assert!(run_study(Study::Deployment, &c).is_err());
    }

    #[test]
    fn trace_study_emits_csv() {
        let c = ExperimentConfig { topology: "fig2".into(), ..ExperimentConfig::default() };
        let r = run_study(Study::Trace, &c).unwrap();
        assert!(r.csv.starts_with("time_ms,router,cid"));
        assert_eq!(r.csv.lines().count(), 12);
    }

    #[test]
    fn small_ratio_sweep_is_seed_ordered() {
        let c = ExperimentConfig {
            topology: "fig2".into(),
            catalog_size: 20,
            warmup: 20,
            measure: 50,
            seeds: vec![3, 1],
            ..ExperimentConfig::default()
        };
        let r = run_study(Study::Ratio, &c).unwrap();
        let rows: Vec<&str> = r.csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 16);
        assert!(rows[0].contains(",3,") && rows[1].contains(",1,"));
        assert_eq!(r.points.len(), 8);
        assert!(r.points.iter().all(|p| p.seeds == 2));
    }
}
