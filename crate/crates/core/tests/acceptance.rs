//! Acceptance report: one PASS/FAIL line per primary criterion.
//!
//! Runs the canonical studies at their preset sizes, so expect several
//! minutes in release mode. Criteria listed in `KNOWN_RED` are reported but
//! do not fail the target; every other failure exits non-zero.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use lira::experiments::studies::{run_study, PointSummary, Study, StudyResult, CACHE_PCTS, CFIB_PCTS, RATIOS};
use lira::experiments::trace::run_trace;
use lira::experiments::ExperimentConfig;
use lira::metrics::{spearman, Stat};

/// Criteria this model does not reproduce; see the README.
const KNOWN_RED: &[u32] = &[3];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(checks: Vec<(bool, String)>) -> Verdict {
    let pass = checks.iter().all(|c| c.0);
    let detail =
        checks.into_iter().map(|(ok, s)| format!("{}{s}", if ok { "" } else { "!" })).collect::<Vec<_>>().join("; ");
    Verdict { pass, detail }
}

/// `a >= b` allowing `k` combined standard errors.
fn ge(a: Stat, b: Stat, k: f64) -> bool {
    a.mean >= b.mean - k * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn preset(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.apply_preset(name).unwrap();
    c
}

fn one<'a>(r: &'a StudyResult, want: &[(&str, &str)]) -> &'a PointSummary {
    let idx: Vec<usize> = r.find(want).map(|p| r.points.iter().position(|q| std::ptr::eq(p, q)).unwrap()).collect();
    assert_eq!(idx.len(), 1, "points matching {want:?}");
    &r.points[idx[0]]
}

fn golden() -> Verdict {
    let start = Instant::now();
    let rows = run_trace().unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(vec![
        (rows_of(&rows, "R1") == expected(&R1_ROWS), "R1 rows t1..t10".into()),
        (rows_of(&rows, "R3") == expected(&R3_ROWS), "R3 rows".into()),
        (secs < 1.0, format!("{secs:.3} s")),
    ])
}

const STRATS: [&str; 4] = ["CH_FA", "CH_FH", "CA_FA", "CA_FH"];
const POLICIES: [&str; 2] = ["lce", "choice"];

fn deployment() -> (StudyResult, f64) {
    let start = Instant::now();
    let r = run_study(Study::Deployment, &preset("fig3")).unwrap();
    (r, start.elapsed().as_secs_f64())
}

fn freshness_vs_off_path(r: &StudyResult, secs: f64) -> Verdict {
    let fresh: Vec<f64> = r.points.iter().map(|p| p.freshness.mean).collect();
    let off: Vec<f64> = r.points.iter().map(|p| p.off_path.mean).collect();
    let rho = spearman(&fresh, &off);
    let mut checks =
        vec![(r.points.len() == 8, format!("{} points", r.points.len())), (rho > 0.7, format!("rho {rho:.3}"))];
    for pol in POLICIES {
        let p = one(r, &[("strategy", "CH_FA"), ("policy", pol)]);
        let gap = (p.off_path.mean - p.freshness.mean).abs();
        checks.push((gap <= 0.02, format!("CH_FA {pol} off {:.4} fresh {:.4}", p.off_path.mean, p.freshness.mean)));
    }
    checks.push((secs < 300.0, format!("{secs:.0} s")));
    verdict(checks)
}

fn orderings(r: &StudyResult) -> Verdict {
    let pt = |s: &str, pol: &str| one(r, &[("strategy", s), ("policy", pol)]);
    let mut checks = Vec::new();
    for s in STRATS {
        let (c, l) = (pt(s, "choice").hit, pt(s, "lce").hit);
        checks.push((ge(c, l, 1.0), format!("(a) {s} choice {:.4} lce {:.4}", c.mean, l.mean)));
    }
    for pol in POLICIES {
        for h in ["CH_FH", "CH_FA"] {
            for a in ["CA_FA", "CA_FH"] {
                let (x, y) = (pt(h, pol).hit, pt(a, pol).hit);
                checks.push((ge(x, y, 1.0), format!("(b) {pol} {h} {:.4} >= {a} {:.4}", x.mean, y.mean)));
            }
        }
        for (a, h) in [("CA_FA", "CH_FA"), ("CA_FH", "CH_FH")] {
            let (x, y) = (pt(a, pol).freshness, pt(h, pol).freshness);
            checks.push((ge(x, y, 1.0), format!("(c) {pol} {a} {:.4} >= {h} {:.4}", x.mean, y.mean)));
        }
    }
    verdict(checks)
}

fn ratio_sweep() -> Verdict {
    let mut checks = Vec::new();
    for pol in POLICIES {
        let mut cfg = preset("fig5");
        cfg.set("policy", pol).unwrap();
        let r = run_study(Study::Ratio, &cfg).unwrap();
        let at = |x: f64| one(&r, &[("ratio", &x.to_string())]);
        let hits: Vec<Stat> = RATIOS.iter().map(|&x| at(x).hit).collect();
        let upto16 = &hits[..RATIOS.len() - 1];
        let mono = upto16.windows(2).all(|w| ge(w[1], w[0], 1.0));
        let series = hits.iter().map(|h| format!("{:.3}", h.mean)).collect::<Vec<_>>().join(",");
        checks.push((mono, format!("{pol} hit [{series}] non-decreasing to 16")));
        let (h4, h16, h32) = (at(4.0).hit.mean, at(16.0).hit.mean, at(32.0).hit.mean);
        checks.push((h32 - h16 < h16 - h4, format!("{pol} gain 16->32 {:.4} < 4->16 {:.4}", h32 - h16, h16 - h4)));
        let p16 = at(16.0);
        checks.push((
            p16.off_path.mean >= 0.25 * p16.on_path.mean,
            format!("{pol} off/on at 16 = {:.2}", p16.off_path.mean / p16.on_path.mean),
        ));
        let (on32, on025) = (at(32.0).on_path.mean, at(0.25).on_path.mean);
        checks.push((on32 <= on025, format!("{pol} on-path 32 {on32:.4} <= 0.25 {on025:.4}")));
    }
    verdict(checks)
}

fn purging() -> Verdict {
    let cfg = preset("fig6");
    let r = run_study(Study::Purging, &cfg).unwrap();
    let w = one(&r, &[("scheme", "lira_w")]);
    let wo = one(&r, &[("scheme", "lira_wo")]);
    let ttl: Vec<String> = cfg.ttl.iter().map(|t| t.to_string()).collect();
    let all: Vec<&PointSummary> = ttl.iter().map(|t| one(&r, &[("scheme", "ttl_all_hits"), ("ttl", t)])).collect();
    let fresh: Vec<&PointSummary> = ttl.iter().map(|t| one(&r, &[("scheme", "ttl_fresh_only"), ("ttl", t)])).collect();
    let stale: Vec<f64> = all.iter().map(|p| p.stale.mean).collect();
    let useful: Vec<f64> = fresh.iter().map(|p| p.useful.mean).collect();
    let argmax = useful.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let best = fresh[argmax].useful;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
    verdict(vec![
        (w.stale.mean == 0.0 && wo.stale.mean == 0.0, "LIRA stale = 0".into()),
        (ttl.len() == 5, format!("{} TTL points", ttl.len())),
        (stale.windows(2).all(|p| p[1] > p[0]), format!("all_hits stale [{}] increasing", fmt(&stale))),
        (argmax > 0 && argmax + 1 < useful.len(), format!("fresh_only useful [{}] peaks inside", fmt(&useful))),
        (ge(w.useful, wo.useful, 1.0), format!("w {:.4} >= w/o {:.4}", w.useful.mean, wo.useful.mean)),
        (ge(wo.useful, best, 1.0), format!("w/o {:.4} >= best TTL {:.4}", wo.useful.mean, best.mean)),
    ])
}

fn incremental() -> Verdict {
    let r = run_study(Study::Incremental, &preset("fig7")).unwrap();
    let at = |c: u32, f: u32| one(&r, &[("cache_pct", &c.to_string()), ("cfib_pct", &f.to_string())]).hit;
    let full = at(100, 100).mean;
    let f30 = at(100, 30).mean;
    let c50 = at(50, 100).mean;
    let mut mono = true;
    let mut worst = String::new();
    let mut note = |a: Stat, b: Stat, what: String| {
        if !ge(b, a, 2.0) {
            mono = false;
            worst = format!("{what}: {:.4} -> {:.4}", a.mean, b.mean);
        }
    };
    for c in CACHE_PCTS {
        for w in CFIB_PCTS.windows(2) {
            note(at(c, w[0]), at(c, w[1]), format!("cache {c}% cfib {}->{}%", w[0], w[1]));
        }
    }
    for f in CFIB_PCTS {
        for w in CACHE_PCTS.windows(2) {
            note(at(w[0], f), at(w[1], f), format!("cfib {f}% cache {}->{}%", w[0], w[1]));
        }
    }
    verdict(vec![
        (f30 >= 0.95 * full, format!("cfib 30% {f30:.4} vs 100% {full:.4}")),
        ((full - c50).abs() <= 0.02, format!("caches 50% {c50:.4} vs 100% {full:.4}")),
        (mono, if worst.is_empty() { "monotone on both axes".into() } else { worst }),
    ])
}

fn oracles() -> Verdict {
    let trace = zipf_trace(10_000, 2_000, 0.8, 5);
    let lru = [0, 1, 7, 64, 500].iter().map(|&c| replay_lru(&trace, c)).collect::<Result<Vec<_>, _>>();
    let bc = betweenness_suite(300);
    let (d, p) = zipf_ks(0.8, 10_000, 200_000, 17);
    let fifo = (1..=8).map(|c| cfib_fifo_vs_queue(10_000, c, c as u64)).collect::<Result<Vec<_>, _>>();
    verdict(vec![
        (lru.is_ok(), lru.map_or_else(|e| e, |_| "LRU replay exact".into())),
        (bc.is_ok(), bc.map_or_else(|e| e, |n| format!("betweenness exact on {n} graphs"))),
        (p > 0.01, format!("Zipf KS D {d:.5} p {p:.3}")),
        (fifo.is_ok(), fifo.map_or_else(|e| e, |_| "C-FIB FIFO exact".into())),
    ])
}

fn protocol() -> Verdict {
    let m = multicast_scenario();
    let (hops, loops) = loop_scenario();
    let cfg = determinism_config();
    let a = run_study(Study::Deployment, &cfg).unwrap().csv;
    let b = run_study(Study::Deployment, &cfg).unwrap().csv;
    verdict(vec![
        (
            m.cp_to_r0 == 1 && m.r0_to_r1 == 1 && m.deliveries == 10 && m.distinct_clients == 10,
            format!("upstream Data {} / {}, deliveries {}", m.cp_to_r0, m.r0_to_r1, m.deliveries),
        ),
        (hops >= 1_000_000 && loops == 0, format!("{hops} hops, {loops} loops")),
        (a == b, "repeat run byte-identical".into()),
    ])
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture or a name filter
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: u32| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut red = Vec::new();
    let mut report = |n: u32, name: &str, v: Verdict, secs: f64| {
        let tag = match (v.pass, KNOWN_RED.contains(&n)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                red.push(n);
                "FAIL"
            }
        };
        println!("[{tag}] {n}. {name} ({secs:.0} s): {}", v.detail);
    };
    let timed = |f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        (v, t.elapsed().as_secs_f64())
    };

    if wanted(1) {
        let (v, s) = timed(&golden);
        report(1, "golden trace", v, s);
    }
    if wanted(2) || wanted(3) {
        let (r, secs) = deployment();
        if wanted(2) {
            report(2, "freshness vs off-path", freshness_vs_off_path(&r, secs), secs);
        }
        if wanted(3) {
            report(3, "deployment orderings", orderings(&r), secs);
        }
    }
    let rest: [(u32, &str, &dyn Fn() -> Verdict); 5] = [
        (4, "ratio sweep", &ratio_sweep),
        (5, "purging", &purging),
        (6, "incremental deployment", &incremental),
        (7, "oracle suites", &oracles),
        (8, "protocol properties", &protocol),
    ];
    for (n, name, f) in rest {
        if wanted(n) {
            let (v, s) = timed(f);
            report(n, name, v, s);
        }
    }
    if red.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("unexpected failures: {red:?}");
        ExitCode::FAILURE
    }
}
