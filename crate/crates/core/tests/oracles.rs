//! Library components against independent brute-force oracles.

mod common;

use common::*;

#[test]
fn lru_store_matches_brute_force_replay() {
    let trace = zipf_trace(10_000, 2_000, 0.8, 5);
    for cap in [0, 1, 7, 64, 500] {
        replay_lru(&trace, cap).unwrap();
    }
}

#[test]
fn betweenness_matches_path_enumeration() {
    assert_eq!(betweenness_suite(300).unwrap(), 301);
}

#[test]
fn zipf_sampler_passes_ks() {
    let (d, p) = zipf_ks(0.8, 10_000, 200_000, 17);
    assert!(p > 0.01, "D = {d}, p = {p}");
}

#[test]
fn cfib_fifo_matches_queue() {
    for cap in 1..=8 {
        cfib_fifo_vs_queue(10_000, cap, cap as u64).unwrap();
    }
}

#[test]
fn enumeration_oracle_counts_split_paths() {
    // square r0-r1-r2-r3-r0, unit latencies: r0..r2 has two shortest paths
    let mut b = lira::topology::GraphBuilder::new();
    for i in 0..4 {
        b.router(&format!("r{i}")).unwrap();
    }
    for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
        b.edge(&format!("r{u}"), &format!("r{v}"), lira::time::SimTime::from_ms(1.0)).unwrap();
    }
    b.provider("cp", "r0", lira::time::SimTime::from_ms(1.0)).unwrap();
    let g = b.build().unwrap();
    let bc = betweenness_by_enumeration(&g);
    for &r in g.routers() {
        assert!((bc[r.index()] - 0.5).abs() < 1e-12);
    }
}
