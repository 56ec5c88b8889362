mod common;

use std::collections::BTreeMap;

use oxflow_core::flow::*;
use oxflow_core::ownership::TypedProgram;

/// Exit entries, the return value and every location's dependencies.
fn profile(tp: &TypedProgram, f: &str, mode: Mode) -> BTreeMap<String, Kappa> {
    let r = analyze_fn(tp, f, FlowConfig::new(mode)).unwrap();
    let mut out = BTreeMap::new();
    for (k, v) in &r.exit_theta.map {
        out.insert(format!("exit {k}"), v.clone());
    }
    out.insert("return".to_string(), r.ret_kappa.clone());
    for (id, k) in &r.rec.kappa {
        out.insert(format!("loc {id}"), k.clone());
    }
    out
}

fn below(a: &BTreeMap<String, Kappa>, b: &BTreeMap<String, Kappa>) -> bool {
    a.keys().eq(b.keys()) && a.iter().all(|(k, v)| v.is_subset(&b[k]))
}

fn strictly_below(a: &BTreeMap<String, Kappa>, b: &BTreeMap<String, Kappa>) -> bool {
    below(a, b) && a != b
}

#[test]
fn modes_are_ordered_pointwise() {
    let mut checked = 0;
    for (name, tp) in common::typed() {
        for (f, tf) in &tp.fns {
            if tf.body().is_none() {
                continue;
            }
            let [m, w, mb, rb] = Mode::ALL.map(|mode| profile(&tp, f, mode));
            assert!(below(&w, &m), "{name}::{f}: whole not below modular");
            assert!(below(&m, &mb), "{name}::{f}: modular not below mutblind");
            assert!(below(&m, &rb), "{name}::{f}: modular not below refblind");
            checked += 1;
        }
    }
    assert!(checked >= 30);
}

#[test]
fn whole_program_is_strictly_more_precise_on_crop() {
    let tp = common::program("crop");
    assert!(strictly_below(&profile(&tp, "main", Mode::Whole), &profile(&tp, "main", Mode::Modular)));
}

#[test]
fn mutability_is_strictly_more_precise_on_read_until() {
    let tp = common::program("read_until");
    assert!(strictly_below(&profile(&tp, "read_until", Mode::Modular), &profile(&tp, "read_until", Mode::MutBlind)));
}

#[test]
fn reference_targets_are_strictly_more_precise_on_link_child() {
    let tp = common::program("link_child");
    assert!(strictly_below(&profile(&tp, "link_child", Mode::Modular), &profile(&tp, "link_child", Mode::RefBlind)));
}
