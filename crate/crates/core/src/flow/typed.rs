//! Syntax-directed flow inference over typed expressions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::mode::{Bug, FlowConfig, Mode};
use super::policy::{self, coarse_init, scope_keys};
use super::theta::{Kappa, Theta};
use crate::lang::places::theta_keys;
use crate::lang::*;
use crate::ownership::{CallFact, TypeEnv, TypedFn, TypedProgram};

/// Per-location facts gathered during one analysis run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Recording {
    pub kappa: BTreeMap<u32, Kappa>,
    /// Conditions controlling whether a location executes.
    pub pc: BTreeMap<u32, Kappa>,
    pub theta_after: BTreeMap<u32, Theta>,
    /// Keys written by the location's own update.
    pub writes: BTreeMap<u32, BTreeSet<PlaceExpr>>,
    /// Dependencies the location's own update adds to the keys it writes.
    pub contrib: BTreeMap<u32, Kappa>,
    /// Entries of each local variable when it leaves scope.
    pub var_exit: BTreeMap<Var, Theta>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowResult {
    pub fn_name: String,
    pub mode: Mode,
    pub n_locs: u32,
    /// Synthetic location `n_locs + i` stands for the initial value of `inputs[i]`.
    pub inputs: Vec<PlaceExpr>,
    pub exit_theta: Theta,
    pub ret_kappa: Kappa,
    pub rec: Recording,
}

impl FlowResult {
    pub fn input_of(&self, id: u32) -> Option<&PlaceExpr> {
        id.checked_sub(self.n_locs).and_then(|i| self.inputs.get(i as usize))
    }
}

/// Callee behaviour as seen from its parameter.
#[derive(Clone, Debug)]
pub struct Summary {
    pub n_locs: u32,
    pub inputs: Vec<PlaceExpr>,
    pub exit: Theta,
    pub touched: BTreeSet<PlaceExpr>,
    pub ret: Kappa,
}

impl Summary {
    /// Map callee dependencies to the caller: callee-local locations collapse to the
    /// call site, parameter inputs become reads of the matching argument place.
    pub fn translate(&self, k: &Kappa, call: u32, read: &dyn Fn(&PlaceExpr) -> Kappa) -> Kappa {
        let mut out = Kappa::new();
        for &l in k {
            if l < self.n_locs {
                out.insert(call);
            } else if let Some(q) = self.inputs.get((l - self.n_locs) as usize) {
                out.extend(read(q));
            }
        }
        out
    }
}

/// Analyze a function body from its entry.
pub fn analyze_fn(tp: &TypedProgram, name: &str, cfg: FlowConfig) -> Option<FlowResult> {
    let f = tp.func(name)?;
    let body = f.body()?;
    let n_locs = f.def.num_locations();
    let scope = vec![(f.def.param.clone(), f.def.param_ty.clone())];
    let inputs = scope_keys(&scope);
    let mut th = coarse_init(&inputs, n_locs);
    let mut a = Analyzer::new(tp, f, cfg, Vec::new(), scope);
    let ret_kappa = a.expr(&mut th, body);
    Some(FlowResult {
        fn_name: name.to_string(),
        mode: cfg.mode,
        n_locs,
        inputs,
        exit_theta: th,
        ret_kappa,
        rec: a.rec,
    })
}

/// Analyze one subexpression starting from a given context; the scope is taken from
/// the typing environment recorded before it.
pub fn analyze_from(tp: &TypedProgram, name: &str, e: &Expr, th: &mut Theta, cfg: FlowConfig) -> (Kappa, Recording) {
    let f = tp.func(name).expect("function");
    let env = f.fact(e.id).env_before.clone().expect("typed expression");
    let mut a = Analyzer::new(tp, f, cfg, Vec::new(), env.vars);
    let k = a.expr(th, e);
    (k, a.rec)
}

/// Whole-program callee summary.
pub fn summarize(tp: &TypedProgram, callee: &str, cfg: FlowConfig, stack: Vec<String>) -> Option<Summary> {
    let f = tp.func(callee)?;
    let body = f.body()?;
    let n_locs = f.def.num_locations();
    let scope = vec![(f.def.param.clone(), f.def.param_ty.clone())];
    let inputs = scope_keys(&scope);
    let mut th = coarse_init(&inputs, n_locs);
    let mut a = Analyzer::new(tp, f, cfg, stack, scope);
    a.writes.push(BTreeSet::new());
    let ret = a.expr(&mut th, body);
    let touched = a.writes.pop().unwrap_or_default();
    Some(Summary {
        n_locs,
        inputs,
        exit: th,
        touched,
        ret,
    })
}

pub struct Analyzer<'a> {
    tp: &'a TypedProgram,
    f: &'a TypedFn,
    cfg: FlowConfig,
    stack: Vec<String>,
    scope: Vec<(Var, Ty)>,
    pcs: Vec<Kappa>,
    writes: Vec<BTreeSet<PlaceExpr>>,
    pub rec: Recording,
}

impl<'a> Analyzer<'a> {
    pub fn new(tp: &'a TypedProgram, f: &'a TypedFn, cfg: FlowConfig, mut stack: Vec<String>, scope: Vec<(Var, Ty)>) -> Self {
        stack.push(f.def.name.clone());
        Analyzer {
            tp,
            f,
            cfg,
            stack,
            scope,
            pcs: Vec::new(),
            writes: Vec::new(),
            rec: Recording::default(),
        }
    }

    fn mode(&self) -> Mode {
        self.cfg.mode
    }

    fn pc(&self) -> Kappa {
        self.pcs.iter().flatten().copied().collect()
    }

    fn env(&self, e: &Expr) -> &'a TypeEnv {
        let f: &'a TypedFn = self.f;
        let facts = f.fact(e.id);
        facts.query_env.as_ref().or(facts.env_before.as_ref()).expect("typed location")
    }

    fn resolve(&self, th: &Theta, env: &TypeEnv, p: &PlaceExpr) -> BTreeSet<PlaceExpr> {
        policy::resolve(self.mode(), env, th, &self.scope, p)
    }

    fn update(&mut self, th: &mut Theta, loc: u32, p: &PlaceExpr, k: &Kappa) {
        let touched = th.update_conflicts(p, k);
        self.rec.contrib.entry(loc).or_default().extend(k.iter().copied());
        self.note_writes(loc, touched);
    }

    fn note_writes(&mut self, loc: u32, keys: impl IntoIterator<Item = PlaceExpr>) {
        let entry = self.rec.writes.entry(loc).or_default();
        for k in keys {
            if let Some(top) = self.writes.last_mut() {
                top.insert(k.clone());
            }
            entry.insert(k);
        }
    }

    fn record(&mut self, e: &Expr, k: &Kappa, th: &Theta) {
        self.rec.kappa.entry(e.id).or_default().extend(k.iter().copied());
        let pc = self.pc();
        self.rec.pc.entry(e.id).or_default().extend(pc);
        self.rec.theta_after.entry(e.id).or_default().join_in(th);
    }

    /// Run `f` collecting the keys it writes.
    fn tracking<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> (T, BTreeSet<PlaceExpr>) {
        self.writes.push(BTreeSet::new());
        let r = f(self);
        let w = self.writes.pop().unwrap_or_default();
        if let Some(top) = self.writes.last_mut() {
            top.extend(w.iter().cloned());
        }
        (r, w)
    }

    fn control(&self, th: &mut Theta, written: &BTreeSet<PlaceExpr>, k: &Kappa) {
        if !self.cfg.has(Bug::DropBranchControl) {
            th.add_to(written, k);
        }
    }

    pub fn expr(&mut self, th: &mut Theta, e: &Expr) -> Kappa {
        let k = self.expr_inner(th, e);
        self.record(e, &k, th);
        k
    }

    fn expr_inner(&mut self, th: &mut Theta, e: &Expr) -> Kappa {
        match &e.kind {
            ExprKind::Const(_) => Kappa::from([e.id]),
            ExprKind::PlaceUse(p) => {
                if self.f.fact(e.id).moved {
                    th.get(p)
                } else {
                    let env = self.env(e);
                    th.union_of(&self.resolve(th, env, p))
                }
            }
            ExprKind::Tuple(es) => {
                let mut k = Kappa::from([e.id]);
                for x in es {
                    k.extend(self.expr(th, x));
                }
                k
            }
            ExprKind::Let { var, ty, rhs, body, .. } => {
                let k1 = self.expr(th, rhs);
                let keys = theta_keys(var, ty);
                for key in &keys {
                    th.set(key.clone(), k1.clone());
                }
                self.scope.push((var.clone(), ty.clone()));
                let k2 = self.expr(th, body);
                self.scope.pop();
                self.rec.var_exit.entry(var.clone()).or_default().join_in(&th.restrict_root(var));
                for key in &keys {
                    th.remove(key);
                }
                for w in self.writes.iter_mut() {
                    w.retain(|p| p.root != *var);
                }
                k2
            }
            ExprKind::Assign(p, rhs) => {
                let k = self.expr(th, rhs);
                if !p.has_deref() {
                    if self.cfg.has(Bug::DropAssignConflicts) {
                        th.add_to([p], &k);
                        self.rec.contrib.entry(e.id).or_default().extend(k.iter().copied());
                        self.note_writes(e.id, [p.clone()]);
                    } else {
                        self.update(th, e.id, p, &k);
                    }
                } else {
                    let env = self.env(e);
                    let targets = if self.cfg.has(Bug::DropDerefResolution) {
                        BTreeSet::from([p.clone()])
                    } else {
                        self.resolve(th, env, p)
                    };
                    let mut kk = k;
                    kk.extend(th.union_of(&p.pointer_prefixes()));
                    for q in &targets {
                        self.update(th, e.id, q, &kk);
                    }
                }
                Kappa::new()
            }
            ExprKind::Seq(a, b) => {
                self.expr(th, a);
                self.expr(th, b)
            }
            ExprKind::Borrow(_, _, p) => {
                let env = self.env(e);
                let mut k = Kappa::from([e.id]);
                k.extend(th.union_of(&self.resolve(th, env, p)));
                k
            }
            ExprKind::LetProv(_, body) => self.expr(th, body),
            ExprKind::If(c, t, el) => {
                let k1 = self.expr(th, c);
                self.pcs.push(k1.clone());
                let mut t2 = th.clone();
                let (k2, w2) = self.tracking(|s| s.expr(&mut t2, t));
                let mut t3 = th.clone();
                let (k3, w3) = self.tracking(|s| s.expr(&mut t3, el));
                self.pcs.pop();
                let mut out = t2.join(&t3);
                let written: BTreeSet<PlaceExpr> = w2.union(&w3).cloned().collect();
                self.control(&mut out, &written, &k1);
                *th = out;
                let mut k = k1;
                k.extend(k2);
                k.extend(k3);
                k
            }
            ExprKind::While(c, body) => {
                let mut acc = th.clone();
                let mut kprev = Kappa::new();
                loop {
                    let before = kprev.clone();
                    let mut tc = acc.clone();
                    self.pcs.push(kprev.clone());
                    let (kc, wc) = self.tracking(|s| s.expr(&mut tc, c));
                    self.pcs.pop();
                    self.control(&mut tc, &wc, &kprev);
                    let mut tb = tc.clone();
                    self.pcs.push(kc.clone());
                    let (_, wb) = self.tracking(|s| s.expr(&mut tb, body));
                    self.pcs.pop();
                    self.control(&mut tb, &wb, &kc);
                    kprev.extend(kc);
                    let next = acc.join(&tb);
                    if next == acc && kprev == before {
                        break;
                    }
                    acc = next;
                }
                let mut tc = acc;
                self.pcs.push(kprev.clone());
                let (_, wc) = self.tracking(|s| s.expr(&mut tc, c));
                self.pcs.pop();
                self.control(&mut tc, &wc, &kprev);
                *th = tc;
                Kappa::new()
            }
            ExprKind::Call { func, arg, .. } => {
                let fact = self.f.fact(e.id).call.clone().expect("call fact");
                self.call(th, e, func, &fact, arg)
            }
        }
    }

    fn call(&mut self, th: &mut Theta, e: &Expr, func: &str, fact: &CallFact, arg: &Place) -> Kappa {
        let pi = arg.to_expr();
        if self.mode() == Mode::Whole {
            if let Some(k) = self.call_whole(th, e, func, &pi) {
                return k;
            }
        }
        let env = self.env(e);
        let mode = self.mode();
        let mut k_arg = Kappa::from([e.id]);
        k_arg.extend(th.get(&pi));
        if !self.cfg.has(Bug::DropShrdLoans) {
            let shrd = policy::call_loans(mode, env, th, &self.scope, OwnQual::Shrd, &pi, &fact.param_ty);
            k_arg.extend(th.union_of(&shrd));
        }
        if !self.cfg.has(Bug::DropUniqMutation) {
            let uniq = policy::call_loans(mode, env, th, &self.scope, OwnQual::Uniq, &pi, &fact.param_ty);
            for q in &uniq {
                self.update(th, e.id, q, &k_arg);
            }
        }
        k_arg
    }

    fn call_whole(&mut self, th: &mut Theta, e: &Expr, func: &str, pi: &PlaceExpr) -> Option<Kappa> {
        let callee = self.tp.func(func)?;
        callee.body()?;
        if self.stack.iter().any(|s| s == func) || self.stack.len() > self.cfg.max_depth {
            return None;
        }
        let summ = summarize(self.tp, func, self.cfg, self.stack.clone())?;
        let env = self.env(e);
        let snapshot = th.clone();
        let scope = self.scope.clone();
        let read = |q: &PlaceExpr| policy::read_kappa(Mode::Whole, env, &snapshot, &scope, &q.rebase(pi));
        let mut updates = Vec::new();
        for k in &summ.touched {
            if k.has_deref() {
                let kw = summ.translate(&summ.exit.get(k), e.id, &read);
                let target = k.rebase(pi);
                for q in policy::resolve(Mode::Whole, env, &snapshot, &scope, &target) {
                    updates.push((q, kw.clone()));
                }
            }
        }
        let ret = summ.translate(&summ.ret, e.id, &read);
        for (q, kw) in updates {
            self.update(th, e.id, &q, &kw);
        }
        Some(ret)
    }
}
