mod common;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oxflow_core::apps::*;
use oxflow_core::flow::*;
use oxflow_core::interp::*;
use oxflow_core::lang::*;
use oxflow_core::ownership::TypedProgram;

fn src(name: &str) -> String {
    std::fs::read_to_string(common::corpus_dir().join(format!("{name}.ox"))).unwrap()
}

fn run_slice(name: &str, f: &str, t: Target, dir: Direction, mode: Mode) -> (String, SliceOutput) {
    let s = src(name);
    let tp = common::checked(&s);
    let r = analyze_fn(&tp, f, FlowConfig::new(mode)).unwrap();
    let out = slice(tp.program.func(f).unwrap(), &s, &r, &t, dir).unwrap();
    (s, out)
}

fn texts(s: &str, out: &SliceOutput) -> Vec<String> {
    out.spans.iter().map(|sp| sp.text(s).to_string()).collect()
}

/// Span of the first expression in `f` whose text is exactly `text`.
fn span_of(tp: &TypedProgram, s: &str, f: &str, text: &str) -> Span {
    let mut hit = None;
    tp.program.func(f).unwrap().body.as_ref().unwrap().walk(&mut |e| {
        if hit.is_none() && e.span.text(s) == text {
            hit = Some(e.span);
        }
    });
    hit.unwrap_or_else(|| panic!("no `{text}`"))
}

#[test]
fn backward_slice_of_tuple_covers_all_three_constants() {
    let (s, out) = run_slice("tuple_field", "main", Target::Var("t".into()), Direction::Backward, Mode::Modular);
    let ts = texts(&s, &out);
    for lit in ["1", "2", "3"] {
        assert!(ts.iter().any(|t| t == lit), "{ts:?}");
    }
}

#[test]
fn backward_slice_of_constant_is_its_literal() {
    let (s, out) = run_slice("constant_sink", "main", Target::Var("msg".into()), Direction::Backward, Mode::Modular);
    assert_eq!(texts(&s, &out), vec!["42"]);
}

#[test]
fn forward_slice_of_first_constant_reaches_let_and_exit_use() {
    let s = src("tuple_field");
    let tp = common::checked(&s);
    let one = span_of(&tp, &s, "main", "1");
    let (_, out) = run_slice("tuple_field", "main", Target::Span(one), Direction::Forward, Mode::Modular);
    let f = tp.program.func("main").unwrap();
    let body = f.body.as_ref().unwrap();
    let mut let_id = None;
    let mut exit_use = None;
    body.walk(&mut |e| match &e.kind {
        ExprKind::Let { var, .. } if var == "t" => let_id = Some(e.id),
        ExprKind::PlaceUse(p) if p.root == "t" => exit_use = Some(e.id),
        _ => {}
    });
    assert!(out.locations.contains(&let_id.unwrap()));
    assert!(out.locations.contains(&exit_use.unwrap()));
    let three = span_of(&tp, &s, "main", "3");
    assert!(!out.spans.contains(&three));
}

#[test]
fn forward_slices_invert_the_location_table() {
    for (name, s) in common::sources() {
        let tp = common::checked(&s);
        for f in &tp.program.fns {
            let Some(r) = analyze_fn(&tp, &f.name, FlowConfig::new(Mode::Modular)) else { continue };
            for loc in f.locations() {
                let out = slice(f, &s, &r, &Target::Span(loc.span), Direction::Forward).unwrap();
                let seed = resolve_seed(f, &loc.span);
                let mut want = BTreeSet::from([seed]);
                for (&l, k) in r.rec.kappa.iter().chain(&r.rec.pc).chain(&r.rec.contrib) {
                    if k.contains(&seed) {
                        want.insert(l);
                    }
                }
                let got: BTreeSet<u32> = out.locations.iter().copied().collect();
                assert_eq!(got, want, "{name}::{} at {}", f.name, seed);
            }
        }
    }
}

/// The innermost expression with exactly this span.
fn resolve_seed(f: &FnDef, sp: &Span) -> u32 {
    let mut id = None;
    f.body.as_ref().unwrap().walk(&mut |e| {
        if e.span == *sp {
            id = Some(e.id);
        }
    });
    id.unwrap()
}

#[test]
fn unresolved_criteria_are_errors() {
    let s = src("tuple_field");
    let tp = common::checked(&s);
    let r = analyze_fn(&tp, "main", FlowConfig::new(Mode::Modular)).unwrap();
    let f = tp.program.func("main").unwrap();
    for dir in [Direction::Backward, Direction::Forward] {
        let e = slice(f, &s, &r, &Target::Var("nope".into()), dir).unwrap_err();
        assert!(matches!(e, SliceError::UnresolvedCriterion(_)));
    }
    let far = Span { line: 99, col: 1, len: 1 };
    assert!(slice(f, &s, &r, &Target::Span(far), Direction::Backward).is_err());
}

/// The variable a body returns when its final expression reads one.
fn returned_var(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Let { body, .. } | ExprKind::LetProv(_, body) | ExprKind::Seq(_, body) => returned_var(body),
        ExprKind::PlaceUse(p) if p.path.is_empty() => Some(&p.root),
        _ => None,
    }
}

#[test]
fn backward_slices_are_sound_under_randomized_constants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut programs = 0;
    let mut runs = 0;
    for (name, s) in common::sources() {
        let tp = common::checked(&s);
        let Some(main) = tp.program.func("main") else { continue };
        let Some(x) = main.body.as_ref().and_then(returned_var) else { continue };
        programs += 1;
        let base = Interp::new(&tp.program).call_fn("main", Value::Unit, &mut NoObserver).unwrap().0;
        for mode in Mode::ALL {
            let r = analyze_fn(&tp, "main", FlowConfig::new(mode)).unwrap();
            let keep: BTreeSet<u32> = slice(main, &s, &r, &Target::Var(x.to_string()), Direction::Backward)
                .unwrap()
                .locations
                .into_iter()
                .collect();
            for _ in 0..100 {
                let mut p = tp.program.clone();
                let f = p.fns.iter_mut().find(|f| f.name == "main").unwrap();
                f.body.as_mut().unwrap().walk_mut(&mut |e| {
                    if keep.contains(&e.id) {
                        return;
                    }
                    if let ExprKind::Const(lit) = &mut e.kind {
                        match lit {
                            Lit::U32(n) => *n = rng.gen_range(0..1000),
                            Lit::Bool(b) => *b = rng.gen(),
                            Lit::Unit => {}
                        }
                    }
                });
                let mut it = Interp::new(&p);
                it.budget = 100_000;
                let Ok((v, _)) = it.call_fn("main", Value::Unit, &mut NoObserver) else { continue };
                runs += 1;
                assert_eq!(v, base, "{name} {mode}: `{x}` changed outside its slice");
            }
        }
    }
    assert!(programs >= 10, "{programs}");
    assert!(runs >= 1000, "{runs}");
}

#[test]
fn password_check_is_flagged_through_the_branch_condition() {
    let s = src("password");
    let tp = common::checked(&s);
    let vs = ifc_check(&tp, Mode::Modular);
    assert_eq!(vs.len(), 1, "{vs:?}");
    let v = &vs[0];
    assert_eq!((v.source_name.as_str(), v.sink_fn.as_str()), ("read_password", "insecure_print"));
    let f = tp.program.func("main").unwrap();
    let mut cond = None;
    f.body.as_ref().unwrap().walk(&mut |e| {
        if let ExprKind::If(c, _, _) = &e.kind {
            cond = Some(c.id);
        }
    });
    assert!(v.chain.contains(&cond.unwrap()), "{:?}", v.chain);
    assert_eq!(v.chain.first(), Some(&v.source));
    assert_eq!(v.chain.last(), Some(&v.sink));
}

#[test]
fn constant_sink_has_no_violations() {
    let tp = common::program("constant_sink");
    for mode in Mode::ALL {
        assert!(ifc_check(&tp, mode).is_empty());
    }
}

/// Values passed to `sink` in one run of `main`.
struct SinkArgs<'a> {
    sink: &'a str,
    seen: Vec<Value>,
}

impl Observer for SinkArgs<'_> {
    fn active(&self) -> bool {
        true
    }

    fn call(&mut self, _: &str, e: &Expr, before: &Stack, _: &Stack, _: &Value) {
        if let ExprKind::Call { func, arg, .. } = &e.kind {
            if func == self.sink {
                self.seen.extend(before.get(&arg.to_expr()).cloned());
            }
        }
    }
}

#[test]
fn secret_through_alias_is_flagged_and_really_flows() {
    let tp = common::program("secure_alias");
    for mode in [Mode::Modular, Mode::RefBlind] {
        let vs = ifc_check(&tp, mode);
        assert!(vs.iter().any(|v| v.source_name == "secret" && v.sink_fn == "send"), "{mode}: {vs:?}");
    }
    let secret_rhs = {
        let mut id = None;
        tp.program.func("main").unwrap().body.as_ref().unwrap().walk(&mut |e| {
            if let ExprKind::Let { secure: true, rhs, .. } = &e.kind {
                id = Some(rhs.id);
            }
        });
        id.unwrap()
    };
    let sink_args = |secret: u32| {
        let mut p = tp.program.clone();
        let f = p.fns.iter_mut().find(|f| f.name == "main").unwrap();
        f.body.as_mut().unwrap().walk_mut(&mut |e| {
            if e.id == secret_rhs {
                e.kind = ExprKind::Const(Lit::U32(secret));
            }
        });
        let mut obs = SinkArgs { sink: "send", seen: vec![] };
        Interp::new(&p).call_fn("main", Value::Unit, &mut obs).unwrap();
        obs.seen
    };
    assert_ne!(sink_args(1), sink_args(2));
}

#[test]
fn ifc_violations_grow_with_coarser_modes() {
    for (name, tp) in common::typed() {
        let key = |m| -> BTreeSet<(String, u32, u32)> {
            ifc_check(&tp, m).into_iter().map(|v| (v.function, v.source, v.sink)).collect()
        };
        let base = key(Mode::Modular);
        assert!(base.is_subset(&key(Mode::MutBlind)), "{name}");
        assert!(base.is_subset(&key(Mode::RefBlind)), "{name}");
    }
}

#[test]
fn percentage_increase_arithmetic() {
    assert_eq!(pct_increase(2, 5), Some(1.5));
    assert_eq!(pct_increase(4, 4), Some(0.0));
    assert_eq!(pct_increase(0, 3), None);
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[1.0, 2.0]), Some(1.5));
    assert_eq!(median(&[]), None);
}

#[test]
fn constant_programs_show_no_difference() {
    let progs: Vec<(String, String)> = ["consts", "tuple_field", "constant_sink"]
        .iter()
        .map(|n| (n.to_string(), src(n)))
        .collect();
    let rep = ablation_report(&progs, Mode::Modular, &[Mode::Whole, Mode::MutBlind, Mode::RefBlind]);
    assert!(!rep.rows.is_empty());
    assert!(rep.rows.iter().all(|r| r.pct_increase.is_none_or(|p| p == 0.0)), "{:?}", rep.rows);
    assert!(rep.summary.iter().all(|s| s.zero_fraction == 1.0 && s.median_nonzero.is_none()));
}

fn row<'a>(rep: &'a AblationReport, f: &str, v: &str, m: Mode) -> &'a AblationRow {
    rep.rows
        .iter()
        .find(|r| r.function == f && r.variable == v && r.mode == m)
        .unwrap_or_else(|| panic!("no row {f} {v} {m}"))
}

#[test]
fn ablation_witnesses() {
    let progs: Vec<(String, String)> = ["crop", "read_until", "link_child"]
        .iter()
        .map(|n| (n.to_string(), src(n)))
        .collect();
    let rep = ablation_report(&progs, Mode::Modular, &[Mode::Whole, Mode::MutBlind, Mode::RefBlind]);
    assert!(rep.skipped.is_empty());
    let crop = row(&rep, "main", "image", Mode::Whole);
    assert!(crop.size < crop.base_size, "{crop:?}");
    let ru = row(&rep, "read_until", "buf", Mode::MutBlind);
    assert!(ru.size > ru.base_size, "{ru:?}");
    let lc = row(&rep, "link_child", "nodes", Mode::RefBlind);
    assert!(lc.size > lc.base_size, "{lc:?}");
    let csv = rep.to_csv();
    assert!(csv.starts_with("program,function,variable,mode,size,base_size,pct_increase\n"));
    assert_eq!(csv.lines().count(), rep.rows.len() + 1);
    let json = rep.histogram_json();
    assert_eq!(json["samples"].as_object().unwrap().len(), 3);
}

#[test]
fn ablation_reports_unparsable_programs() {
    let rep = ablation_report(&[("bad".into(), "fn main( {".into())], Mode::Modular, &[Mode::Whole]);
    assert!(rep.rows.is_empty());
    assert_eq!(rep.skipped.len(), 1);
}
