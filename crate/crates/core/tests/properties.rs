use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use oxflow_core::cfg::control::control_deps;
use oxflow_core::cfg::{Block, Body, Term};
use oxflow_core::flow::{Kappa, Theta};
use oxflow_core::lang::*;
use oxflow_core::ownership::{propagate_loans, Loan, LoanSet};

fn place() -> impl Strategy<Value = PlaceExpr> {
    (0..3usize, prop::collection::vec(0..2usize, 0..2)).prop_map(|(v, fs)| {
        let mut p = PlaceExpr::var(["a", "b", "c"][v]);
        for f in fs {
            p = p.field(f);
        }
        p
    })
}

fn kappa() -> impl Strategy<Value = Kappa> {
    prop::collection::btree_set(0..8u32, 0..5)
}

fn theta() -> impl Strategy<Value = Theta> {
    prop::collection::btree_map(place(), kappa(), 0..6).prop_map(|map| Theta { map })
}

proptest! {
    #[test]
    fn join_is_a_semilattice(a in theta(), b in theta(), c in theta()) {
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        prop_assert_eq!(a.join(&a), a.clone());
        prop_assert_eq!(a.join(&Theta::new()), a.clone());
        prop_assert!(a.subset_of(&a.join(&b)));
    }

    #[test]
    fn conflict_updates_are_monotone(a in theta(), b in theta(), p in place(), k in kappa()) {
        let (mut x, mut y) = (a.clone(), a.join(&b));
        x.update_conflicts(&p, &k);
        y.update_conflicts(&p, &k);
        prop_assert!(a.subset_of(&x));
        prop_assert!(x.subset_of(&y));
    }
}

/// Random graph whose last block returns; each other block has a forward edge so the exit is reachable.
fn graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2..=12usize)
        .prop_flat_map(|n| {
            let rows: Vec<_> = (0..n - 1)
                .map(|i| (i + 1..n, prop::option::of(0..n)).prop_map(|(a, b)| std::iter::once(a).chain(b).collect::<Vec<_>>()))
                .collect();
            rows
        })
        .prop_map(|mut rows| {
            rows.push(vec![]);
            rows
        })
}

fn body(succs: &[Vec<usize>]) -> Body {
    let blocks = succs
        .iter()
        .map(|s| Block {
            stmts: vec![],
            term: match s.as_slice() {
                [] => Term::Return(0),
                [a] => Term::Goto(*a),
                [a, b] => Term::Switch { loc: 0, cond: 0, then: *a, other: *b },
                _ => unreachable!(),
            },
        })
        .collect();
    Body {
        fn_name: "g".into(),
        param: "_".into(),
        param_ty: Ty::Unit,
        blocks,
        n_temps: 1,
    }
}

/// Whether every path from `from` to the exit passes through `y`.
fn postdominates(succs: &[Vec<usize>], y: usize, from: usize) -> bool {
    if y == from {
        return true;
    }
    let exit = succs.len() - 1;
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(b) = stack.pop() {
        if b == exit {
            return false;
        }
        for &s in &succs[b] {
            if s != y && seen.insert(s) {
                stack.push(s);
            }
        }
    }
    true
}

fn brute_control_deps(succs: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
    let n = succs.len();
    let mut deps = vec![BTreeSet::new(); n];
    for x in 0..n {
        if succs[x].len() != 2 {
            continue;
        }
        for y in 0..n {
            let strictly = y != x && postdominates(succs, y, x);
            if !strictly && succs[x].iter().any(|&s| postdominates(succs, y, s)) {
                deps[y].insert(x);
            }
        }
    }
    deps
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn control_deps_match_path_definition(succs in graph()) {
        prop_assert_eq!(control_deps(&body(&succs)), brute_control_deps(&succs));
    }
}

fn loan(x: &str) -> Loan {
    Loan::new(OwnQual::Uniq, PlaceExpr::var(x))
}

fn provs(entries: &[(&str, &[&str])]) -> BTreeMap<String, LoanSet> {
    entries
        .iter()
        .map(|(r, ls)| (r.to_string(), ls.iter().map(|x| loan(x)).collect()))
        .collect()
}

fn cons(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn propagation_through_a_cycle() {
    let mut ps = provs(&[("r1", &["x"]), ("r2", &["y"])]);
    propagate_loans(&mut ps, &cons(&[("r1", "r2"), ("r2", "r1")]));
    assert_eq!(ps, provs(&[("r1", &["x", "y"]), ("r2", &["x", "y"])]));
}

#[test]
fn propagation_without_constraints() {
    let before = provs(&[("r1", &["x"]), ("r2", &[])]);
    let mut ps = before.clone();
    propagate_loans(&mut ps, &BTreeSet::new());
    assert_eq!(ps, before);
}

proptest! {
    #[test]
    fn propagation_is_reachability(
        init in prop::collection::vec(prop::collection::btree_set(0..4usize, 0..3), 1..6),
        edges in prop::collection::vec((0..6usize, 0..6usize), 0..10),
    ) {
        let n = init.len();
        let name = |i: usize| format!("r{i}");
        let vars = ["w", "x", "y", "z"];
        let mut ps: BTreeMap<String, LoanSet> =
            init.iter().enumerate().map(|(i, s)| (name(i), s.iter().map(|&v| loan(vars[v])).collect())).collect();
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|(a, b)| *a < n && *b < n).collect();
        let cs = edges.iter().map(|&(a, b)| (name(a), name(b))).collect();
        propagate_loans(&mut ps, &cs);
        for b in 0..n {
            let mut reach = BTreeSet::from([b]);
            let mut stack = vec![b];
            while let Some(t) = stack.pop() {
                for &(a, bb) in &edges {
                    if bb == t && reach.insert(a) {
                        stack.push(a);
                    }
                }
            }
            let want: LoanSet = reach.iter().flat_map(|&a| init[a].iter().map(|&v| loan(vars[v]))).collect();
            prop_assert_eq!(&ps[&name(b)], &want);
        }
    }
}
