//! Randomized checks of the semantic lemmas behind noninterference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gen::{agree_on, gen_stack};
use super::ni::targets;
use super::TRIAL_BUDGET;
use crate::interp::{Interp, Loc, NoObserver, Observer, Stack, Value};
use crate::lang::*;
use crate::ownership::TypedProgram;

#[derive(Clone, Debug, Default, Serialize)]
pub struct LemmaReport {
    pub trials: usize,
    pub checks: usize,
    pub skipped: usize,
    pub violations: Vec<String>,
}

impl LemmaReport {
    pub fn merge(&mut self, o: LemmaReport) {
        self.trials += o.trials;
        self.checks += o.checks;
        self.skipped += o.skipped;
        self.violations.extend(o.violations);
    }
}

/// Write locality: an assignment changes only places conflicting with its target.
/// Call frame: undoing the unique loans of a call's argument restores the stack.
struct Watch<'a> {
    tp: &'a TypedProgram,
    locality: bool,
    rep: LemmaReport,
}

impl Observer for Watch<'_> {
    fn active(&self) -> bool {
        true
    }

    fn assign(&mut self, fn_name: &str, e: &Expr, before: &Stack, after: &Stack, target: &Loc) {
        if !self.locality {
            return;
        }
        self.rep.checks += 1;
        let old = before.leaves();
        let new = after.leaves();
        if old.len() != new.len() {
            self.rep.violations.push(format!("{fn_name}@{}: stack shape changed", e.id));
            return;
        }
        for ((l, a), (_, b)) in old.iter().zip(&new) {
            if a != b && !l.conflicts(target) {
                self.rep
                    .violations
                    .push(format!("{fn_name}@{}: {l} changed by a write to {target}", e.id));
            }
        }
    }

    fn call(&mut self, fn_name: &str, e: &Expr, before: &Stack, after: &Stack, _result: &Value) {
        if self.locality {
            return;
        }
        let Some(fact) = self.tp.func(fn_name).and_then(|f| f.fact(e.id).call.clone()) else {
            return;
        };
        self.rep.checks += 1;
        let mut reverted = after.clone();
        for p in &fact.uniq_loans {
            if let Some(l) = before.eval_place(p) {
                let v = before.read(&l).cloned().expect("resolved place");
                reverted.write(&l, v);
            }
        }
        if &reverted != before {
            self.rep
                .violations
                .push(format!("{fn_name}@{}: call changed memory outside its unique loans", e.id));
        }
    }
}

fn observe(tp: &TypedProgram, trials: usize, seed: u64, locality: bool) -> LemmaReport {
    let ts = targets(tp);
    let mut w = Watch {
        tp,
        locality,
        rep: LemmaReport::default(),
    };
    if ts.is_empty() {
        return w.rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..trials {
        let t = &ts[i % ts.len()];
        let f = tp.func(&t.fn_name).expect("function");
        let e = f.def.expr_by_id(t.expr_id).expect("expression");
        w.rep.trials += 1;
        let Some(mut st) = gen_stack(&t.env, &mut rng) else {
            w.rep.skipped += 1;
            continue;
        };
        let mut it = Interp::new(&tp.program);
        it.budget = TRIAL_BUDGET;
        if it.eval(&t.fn_name, &mut st, e, &mut w).is_err() {
            w.rep.skipped += 1;
        }
    }
    w.rep
}

pub fn write_locality(tp: &TypedProgram, trials: usize, seed: u64) -> LemmaReport {
    observe(tp, trials, seed, true)
}

pub fn call_frame(tp: &TypedProgram, trials: usize, seed: u64) -> LemmaReport {
    observe(tp, trials, seed, false)
}

/// Call determinism: two stacks agreeing on a call's argument and its shared loans give the same
/// result and the same values on those places afterwards.
pub fn call_determinism(tp: &TypedProgram, trials: usize, seed: u64) -> LemmaReport {
    let mut sites = Vec::new();
    for (name, f) in &tp.fns {
        let Some(body) = f.body() else { continue };
        if !f.def.is_closed() {
            continue;
        }
        body.walk(&mut |e| {
            if let (ExprKind::Call { arg, .. }, Some(env), Some(call)) =
                (&e.kind, &f.fact(e.id).env_before, &f.fact(e.id).call)
            {
                let mut agree = vec![arg.to_expr()];
                agree.extend(call.shrd_loans.iter().cloned());
                agree.retain(|p| env.has_var(&p.root));
                sites.push((name.clone(), e, env.clone(), agree));
            }
        });
    }
    let mut rep = LemmaReport::default();
    if sites.is_empty() {
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..trials {
        let (fname, e, env, agree) = &sites[i % sites.len()];
        rep.trials += 1;
        let Some(s1) = gen_stack(env, &mut rng) else {
            rep.skipped += 1;
            continue;
        };
        let s2 = (0..20)
            .find_map(|_| gen_stack(env, &mut rng).and_then(|s| agree_on(&s1, s, agree.iter())))
            .unwrap_or_else(|| s1.clone());
        let (mut p1, mut p2) = (s1.clone(), s2.clone());
        let run = |st: &mut Stack| {
            let mut it = Interp::new(&tp.program);
            it.budget = TRIAL_BUDGET;
            it.eval(fname, st, e, &mut NoObserver)
        };
        let (r1, r2) = (run(&mut p1), run(&mut p2));
        let (Ok(v1), Ok(v2)) = (r1, r2) else {
            rep.skipped += 1;
            continue;
        };
        rep.checks += 1;
        if v1 != v2 {
            rep.violations.push(format!("{fname}@{}: results differ ({v1} vs {v2})", e.id));
        }
        for p in agree {
            if p1.get(p) != p2.get(p) {
                rep.violations.push(format!("{fname}@{}: `{p}` differs after the call", e.id));
            }
        }
    }
    rep
}
