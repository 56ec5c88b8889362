mod common;

use oxflow_core::cfg::analyze_cfg;
use oxflow_core::flow::*;
use oxflow_core::lang::*;
use oxflow_core::ownership::*;

/// Exit contexts of locals bound outside any branch or loop.
fn top_level_lets(e: &Expr, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Let { var, rhs, body, .. } => {
            out.push(var.clone());
            top_level_lets(rhs, out);
            top_level_lets(body, out);
        }
        ExprKind::Seq(a, b) => {
            top_level_lets(a, out);
            top_level_lets(b, out);
        }
        ExprKind::LetProv(_, b) => top_level_lets(b, out),
        ExprKind::Tuple(es) => es.iter().for_each(|x| top_level_lets(x, out)),
        ExprKind::Assign(_, r) => top_level_lets(r, out),
        _ => {}
    }
}

#[test]
fn corpus_typechecks() {
    let mut bad = Vec::new();
    for (name, src) in common::sources() {
        match parse_located(&src) {
            Err(e) => bad.push(format!("{name}: parse {e}")),
            Ok(p) => {
                if let Err(es) = typecheck(&p) {
                    for (f, e) in es {
                        bad.push(format!("{name}::{f}: {e}"));
                    }
                }
            }
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn engines_agree_on_corpus() {
    let mut bad = Vec::new();
    for (name, src) in common::sources() {
        let tp = typecheck(&parse_located(&src).unwrap()).unwrap();
        for (f, tf) in &tp.fns {
            if tf.body().is_none() {
                continue;
            }
            let mut vars = Vec::new();
            top_level_lets(tf.body().unwrap(), &mut vars);
            let top = |r: &FlowResult| {
                vars.iter()
                    .map(|v| (v.clone(), r.rec.var_exit.get(v).cloned()))
                    .collect::<Vec<_>>()
            };
            for mode in Mode::ALL {
                let a = analyze_fn(&tp, f, FlowConfig::new(mode)).unwrap();
                let b = analyze_cfg(&tp, f, FlowConfig::new(mode)).unwrap();
                if a.exit_theta != b.exit_theta || a.ret_kappa != b.ret_kappa || top(&a) != top(&b) {
                    bad.push(format!(
                        "{name}::{f} {mode}\n typed {:?} ret {:?} vars {:?}\n cfg   {:?} ret {:?} vars {:?}",
                        a.exit_theta.map, a.ret_kappa, top(&a), b.exit_theta.map, b.ret_kappa, top(&b)
                    ));
                }
            }
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn cfg_states_end_in_the_exit_context() {
    use oxflow_core::cfg::{cfg_states, to_dot_annotated};
    for (name, src) in common::sources() {
        let tp = typecheck(&parse_located(&src).unwrap()).unwrap();
        for (f, tf) in &tp.fns {
            if tf.body().is_none() {
                continue;
            }
            let cfg = FlowConfig::new(Mode::Modular);
            let (body, states) = cfg_states(&tp, f, cfg).unwrap();
            let last = states[body.exit()].last().unwrap();
            let visible: Vec<_> = last.map.iter().filter(|(k, _)| !k.root.starts_with('%')).collect();
            let exit = analyze_cfg(&tp, f, cfg).unwrap().exit_theta;
            assert!(visible.into_iter().eq(exit.map.iter()), "{name}::{f}");
            let dot = to_dot_annotated(&body, &states);
            assert!(dot.starts_with("digraph") && dot.contains("Θ = {"), "{name}::{f}");
        }
    }
}
