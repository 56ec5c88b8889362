mod common;

use oxflow_core::harness::*;
use oxflow_core::ownership::*;

fn run_all(f: fn(&TypedProgram, usize, u64) -> LemmaReport) -> LemmaReport {
    let mut total = LemmaReport::default();
    for (name, tp) in common::typed() {
        let r = f(&tp, 1000, 11);
        eprintln!("{name}: trials {} checks {} skipped {}", r.trials, r.checks, r.skipped);
        total.merge(r);
    }
    total
}

#[test]
fn writes_touch_only_conflicting_locations() {
    let r = run_all(write_locality);
    assert!(r.checks >= 1000, "{}", r.checks);
    assert!(r.violations.is_empty(), "{:?}", &r.violations[..r.violations.len().min(5)]);
}

#[test]
fn calls_change_only_unique_loans() {
    let r = run_all(call_frame);
    assert!(r.checks >= 1000, "{}", r.checks);
    assert!(r.violations.is_empty(), "{:?}", &r.violations[..r.violations.len().min(5)]);
}

#[test]
fn calls_are_determined_by_their_loans() {
    let r = run_all(call_determinism);
    assert!(r.checks >= 1000, "{}", r.checks);
    assert!(r.violations.is_empty(), "{:?}", &r.violations[..r.violations.len().min(5)]);
}
