use oxflow_core::flow::*;
use oxflow_core::lang::*;
use oxflow_core::ownership::*;

fn load(src: &str) -> TypedProgram {
    typecheck(&parse_located(src).unwrap()).unwrap()
}

fn at(tp: &TypedProgram, src: &str, f: &str, text: &str) -> u32 {
    let mut hit = None;
    tp.func(f).unwrap().body().unwrap().walk(&mut |e| {
        if hit.is_none() && e.span.text(src) == text {
            hit = Some(e.id);
        }
    });
    hit.unwrap_or_else(|| panic!("no expression `{text}`"))
}

fn pe(s: &str) -> PlaceExpr {
    let mut p = PlaceExpr::var(s.trim_start_matches('*').split('.').next().unwrap());
    let derefs = s.len() - s.trim_start_matches('*').len();
    for f in s.trim_start_matches('*').split('.').skip(1) {
        p = p.field(f.parse().unwrap());
    }
    for _ in 0..derefs {
        p = p.deref();
    }
    p
}

#[test]
fn tuple_field_update() {
    let src = include_str!("../../../corpus/tuple_field.ox");
    let tp = load(src);
    let l1 = at(&tp, src, "main", "1");
    let l2 = at(&tp, src, "main", "2");
    let l3 = at(&tp, src, "main", "3");
    let asg = at(&tp, src, "main", "t.1 := 3");
    for mode in Mode::ALL {
        let r = analyze_fn(&tp, "main", FlowConfig::new(mode)).unwrap();
        let th = &r.rec.theta_after[&asg];
        assert!(th.get(&pe("t")).contains(&l3));
        assert!(th.get(&pe("t.1")).contains(&l3));
        assert!(!th.get(&pe("t.0")).contains(&l3));
        assert!(th.get(&pe("t.0")).is_superset(&[l1, l2].into()));
        assert!(r.ret_kappa.contains(&l3));
    }
}

#[test]
fn cp_call_modular_and_mutblind() {
    let src = include_str!("../../../corpus/cp.ox");
    let tp = load(src);
    let l1 = at(&tp, src, "main", "1");
    let l2 = at(&tp, src, "main", "2");
    let call = at(&tp, src, "main", "cp<r2, r4>(args)");
    let before = |r: &FlowResult| r.rec.theta_after[&at(&tp, src, "main", "(&r1 uniq x, &r3 shrd y)")].clone();
    let m = analyze_fn(&tp, "main", FlowConfig::new(Mode::Modular)).unwrap();
    let th = &m.rec.theta_after[&call];
    assert!(th.get(&pe("x")).is_superset(&[l1, l2].into()));
    let y0 = before(&m).get(&pe("y"));
    assert_eq!(th.get(&pe("y")), y0);
    let b = analyze_fn(&tp, "main", FlowConfig::new(Mode::MutBlind)).unwrap();
    let yb = b.rec.theta_after[&call].get(&pe("y"));
    assert!(yb.is_superset(&y0) && yb != y0);
}

#[test]
fn get_count_condition_reaches_map() {
    let src = include_str!("../../../corpus/get_count.ox");
    let tp = load(src);
    let cond = at(&tp, src, "get_count", "contains<r2>(q)");
    for mode in Mode::ALL {
        let r = analyze_fn(&tp, "get_count", FlowConfig::new(mode)).unwrap();
        assert!(r.exit_theta.get(&pe("h")).contains(&cond), "{mode}");
        assert!(r.exit_theta.get(&pe("*h")).contains(&cond), "{mode}");
    }
}

#[test]
fn branch_control_bug_loses_condition() {
    let src = include_str!("../../../corpus/get_count.ox");
    let tp = load(src);
    let cond = at(&tp, src, "get_count", "contains<r2>(q)");
    let ins = at(&tp, src, "get_count", "insert<r4>(m)");
    let cfg = FlowConfig::new(Mode::Modular).with_bug(Bug::DropBranchControl);
    let r = analyze_fn(&tp, "get_count", cfg).unwrap();
    let k = r.exit_theta.get(&pe("*h"));
    assert!(k.contains(&ins));
    assert!(!k.contains(&cond));
}
