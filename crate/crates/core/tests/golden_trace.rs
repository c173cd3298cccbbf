//! The three-router walk-through must reproduce the published C-FIB tables
//! of R1 and R3 row for row.

mod common;

use std::time::Instant;

use common::*;
use lira::experiments::trace::{run_trace, TraceRow};

#[test]
fn r1_and_r3_tables_match_exactly() {
    let start = Instant::now();
    let rows = run_trace().unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert_eq!(rows_of(&rows, "R1"), expected(&R1_ROWS));
    assert_eq!(rows_of(&rows, "R3"), expected(&R3_ROWS));
}

#[test]
fn table_labels_follow_simulated_time() {
    let rows = run_trace().unwrap();
    let of = |router: &str| rows.iter().filter(|r| r.router == router).collect::<Vec<&TraceRow>>();
    let mut labelled: Vec<(u32, &TraceRow)> = Vec::new();
    labelled.extend(R1_LABELS.iter().copied().zip(of("R1")));
    labelled.extend(R3_LABELS.iter().copied().zip(of("R3")));
    assert_eq!(labelled.len(), 11);
    for a in &labelled {
        for b in &labelled {
            if a.0 < b.0 {
                assert!(a.1.time < b.1.time, "t{} at {} is not before t{} at {}", a.0, a.1.time, b.0, b.1.time);
            }
        }
    }
    let mut seen: Vec<u32> = labelled.iter().map(|l| l.0).collect();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen, (1..=10).collect::<Vec<_>>());
}
