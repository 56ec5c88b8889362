//! Forward dataflow over the lowered body.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::alias::Aliases;
use super::control::control_deps;
use super::lower::{is_temp, lower, temp_place, Body, Rvalue, Stmt, Term};
use crate::flow::policy::{self, coarse_init, scope_keys};
use crate::flow::{FlowConfig, FlowResult, Kappa, Mode, Recording, Summary, Theta};
use crate::lang::places::theta_keys;
use crate::lang::*;
use crate::ownership::{TypedFn, TypedProgram};

/// Run the dataflow engine on one function.
pub fn analyze_cfg(tp: &TypedProgram, name: &str, cfg: FlowConfig) -> Option<FlowResult> {
    run(tp, name, cfg, Vec::new()).map(|(r, _)| r)
}

fn engine<'a>(tp: &'a TypedProgram, f: &'a TypedFn, body: &'a Body, cfg: FlowConfig, stack: Vec<String>) -> Engine<'a> {
    Engine {
        tp,
        cfg,
        stack,
        aliases: Aliases::compute(f),
        body,
        cdeps: control_deps(body),
        rec: Recording::default(),
        touched: BTreeSet::new(),
        ins: Vec::new(),
    }
}

/// Lowered body of `name` with the context before and after each statement of each block.
pub fn cfg_states(tp: &TypedProgram, name: &str, cfg: FlowConfig) -> Option<(Body, Vec<Vec<Theta>>)> {
    let f = tp.func(name)?;
    let body = lower(f)?;
    let inputs = scope_keys(&[(f.def.param.clone(), f.def.param_ty.clone())]);
    let mut e = engine(tp, f, &body, cfg, vec![name.to_string()]);
    e.fixpoint(coarse_init(&inputs, f.def.num_locations()));
    let mut states = Vec::new();
    for (b, blk) in body.blocks.iter().enumerate() {
        let mut th = e.ins[b].clone().unwrap_or_default();
        let mut v = vec![th.clone()];
        for s in &blk.stmts {
            e.step(b, s, &mut th);
            v.push(th.clone());
        }
        states.push(v);
    }
    Some((body, states))
}

fn run(tp: &TypedProgram, name: &str, cfg: FlowConfig, stack: Vec<String>) -> Option<(FlowResult, BTreeSet<PlaceExpr>)> {
    let f = tp.func(name)?;
    let body = lower(f)?;
    let n_locs = f.def.num_locations();
    let inputs = scope_keys(&[(f.def.param.clone(), f.def.param_ty.clone())]);
    let init = coarse_init(&inputs, n_locs);
    let mut stack = stack;
    stack.push(name.to_string());
    let mut e = engine(tp, f, &body, cfg, stack);
    let (exit, ret) = e.fixpoint(init);
    let mut exit_theta = Theta::new();
    for (k, v) in exit.map {
        if !is_temp(&k) {
            exit_theta.set(k, v);
        }
    }
    let param = f.def.param.clone();
    let touched = e.touched.iter().filter(|k| k.root == param).cloned().collect();
    Some((
        FlowResult {
            fn_name: name.to_string(),
            mode: cfg.mode,
            n_locs,
            inputs,
            exit_theta,
            ret_kappa: ret,
            rec: e.rec,
        },
        touched,
    ))
}

struct Engine<'a> {
    tp: &'a TypedProgram,
    cfg: FlowConfig,
    stack: Vec<String>,
    aliases: Aliases,
    body: &'a Body,
    cdeps: Vec<BTreeSet<usize>>,
    rec: Recording,
    touched: BTreeSet<PlaceExpr>,
    /// Block entry contexts at the fixpoint.
    ins: Vec<Option<Theta>>,
}

impl Engine<'_> {
    fn fixpoint(&mut self, init: Theta) -> (Theta, Kappa) {
        let n = self.body.blocks.len();
        let mut ins: Vec<Option<Theta>> = vec![None; n];
        ins[0] = Some(init);
        let mut work = VecDeque::from([0usize]);
        let mut queued = vec![false; n];
        queued[0] = true;
        while let Some(b) = work.pop_front() {
            queued[b] = false;
            let mut th = ins[b].clone().unwrap_or_default();
            for s in &self.body.blocks[b].stmts {
                self.step(b, s, &mut th);
            }
            for s in self.body.blocks[b].term.succs() {
                let next = match &ins[s] {
                    Some(old) => old.join(&th),
                    None => th.clone(),
                };
                if ins[s].as_ref() != Some(&next) {
                    ins[s] = Some(next);
                    if !queued[s] {
                        queued[s] = true;
                        work.push_back(s);
                    }
                }
            }
        }
        let exit = self.body.exit();
        let mut th = ins[exit].clone().unwrap_or_default();
        self.ins = ins;
        for s in &self.body.blocks[exit].stmts {
            self.step(exit, s, &mut th);
        }
        let Term::Return(t) = self.body.blocks[exit].term else {
            unreachable!()
        };
        let ret = th.get(&temp_place(t));
        (th, ret)
    }

    fn control(&self, b: usize, th: &Theta) -> Kappa {
        let mut k = Kappa::new();
        for &s in &self.cdeps[b] {
            if let Term::Switch { cond, .. } = self.body.blocks[s].term {
                k.extend(th.get(&temp_place(cond)));
            }
        }
        k
    }

    fn resolve(&self, th: &Theta, p: &PlaceExpr) -> BTreeSet<PlaceExpr> {
        policy::resolve(self.cfg.mode, &self.aliases, th, &self.aliases.vars, p)
    }

    fn update(&mut self, th: &mut Theta, loc: u32, p: &PlaceExpr, k: &Kappa) {
        let touched = th.update_conflicts(p, k);
        let w = self.rec.writes.entry(loc).or_default();
        for t in touched {
            w.insert(t.clone());
            self.touched.insert(t);
        }
    }

    fn step(&mut self, b: usize, s: &Stmt, th: &mut Theta) {
        let ctrl = self.control(b, th);
        let pc = ctrl.clone();
        match s {
            Stmt::Def { loc, dest, rv } => {
                let mut k = match rv {
                    Rvalue::Const => Kappa::from([*loc]),
                    Rvalue::Empty => Kappa::new(),
                    Rvalue::Use { place, moved: true } => th.get(place),
                    Rvalue::Use { place, moved: false } => th.union_of(&self.resolve(th, place)),
                    Rvalue::Temp(t) => th.get(&temp_place(*t)),
                    Rvalue::TupleAgg(ts) => {
                        let mut k = Kappa::from([*loc]);
                        for t in ts {
                            k.extend(th.get(&temp_place(*t)));
                        }
                        k
                    }
                    Rvalue::Ref(p) => {
                        let mut k = Kappa::from([*loc]);
                        k.extend(th.union_of(&self.resolve(th, p)));
                        k
                    }
                };
                k.extend(ctrl);
                self.rec.kappa.entry(*loc).or_default().extend(k.iter().copied());
                th.set(temp_place(*dest), k);
            }
            Stmt::Bind { var, ty, src, .. } => {
                let mut k = th.get(&temp_place(*src));
                k.extend(ctrl);
                for key in theta_keys(var, ty) {
                    th.set(key, k.clone());
                }
            }
            Stmt::Write { loc, place, src } => {
                let mut k = th.get(&temp_place(*src));
                k.extend(ctrl);
                if !place.has_deref() {
                    self.update(th, *loc, place, &k);
                } else {
                    k.extend(th.union_of(&place.pointer_prefixes()));
                    for q in self.resolve(th, place) {
                        self.update(th, *loc, &q, &k);
                    }
                }
            }
            Stmt::Call {
                loc,
                dest,
                func,
                arg,
                param_ty,
            } => {
                let mut k = match self.whole_call(th, *loc, func, arg, &ctrl) {
                    Some(k) => k,
                    None => {
                        let mode = self.cfg.mode;
                        let mut k_arg = Kappa::from([*loc]);
                        k_arg.extend(th.get(arg));
                        let vars = &self.aliases.vars;
                        let shrd = policy::call_loans(mode, &self.aliases, th, vars, OwnQual::Shrd, arg, param_ty);
                        k_arg.extend(th.union_of(&shrd));
                        k_arg.extend(ctrl.iter().copied());
                        let uniq = policy::call_loans(mode, &self.aliases, th, vars, OwnQual::Uniq, arg, param_ty);
                        for q in &uniq {
                            self.update(th, *loc, q, &k_arg);
                        }
                        k_arg
                    }
                };
                k.extend(ctrl);
                self.rec.kappa.entry(*loc).or_default().extend(k.iter().copied());
                th.set(temp_place(*dest), k);
            }
            Stmt::StorageDead { var, .. } => {
                let local = th.restrict_root(var);
                self.rec.var_exit.entry(var.clone()).or_default().join_in(&local);
                for k in local.map.keys() {
                    th.remove(k);
                }
            }
        }
        let mut visible = Theta::new();
        for (k, v) in &th.map {
            if !is_temp(k) {
                visible.set(k.clone(), v.clone());
            }
        }
        self.rec.theta_after.entry(s.loc()).or_default().join_in(&visible);
        self.rec.pc.entry(s.loc()).or_default().extend(pc);
    }

    fn whole_call(&mut self, th: &mut Theta, loc: u32, func: &str, arg: &PlaceExpr, ctrl: &Kappa) -> Option<Kappa> {
        if self.cfg.mode != Mode::Whole
            || self.stack.iter().any(|s| s == func)
            || self.stack.len() > self.cfg.max_depth
        {
            return None;
        }
        let (res, touched) = run(self.tp, func, self.cfg, self.stack.clone())?;
        let summ = Summary {
            n_locs: res.n_locs,
            inputs: res.inputs,
            exit: res.exit_theta,
            touched,
            ret: res.ret_kappa,
        };
        let snapshot = th.clone();
        let read = |q: &PlaceExpr| policy::read_kappa(Mode::Whole, &self.aliases, &snapshot, &self.aliases.vars, &q.rebase(arg));
        let mut updates = Vec::new();
        for k in &summ.touched {
            if k.has_deref() {
                let mut kw = summ.translate(&summ.exit.get(k), loc, &read);
                kw.extend(ctrl.iter().copied());
                for q in self.resolve(&snapshot, &k.rebase(arg)) {
                    updates.push((q, kw.clone()));
                }
            }
        }
        let ret = summ.translate(&summ.ret, loc, &read);
        for (q, kw) in updates {
            self.update(th, loc, &q, &kw);
        }
        Some(ret)
    }
}

/// Map from location to the switch locations it is control dependent on.
pub fn control_locations(body: &Body) -> BTreeMap<u32, BTreeSet<u32>> {
    let cd = control_deps(body);
    let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (b, blk) in body.blocks.iter().enumerate() {
        let sw: BTreeSet<u32> = cd[b]
            .iter()
            .filter_map(|&s| match body.blocks[s].term {
                Term::Switch { loc, .. } => Some(loc),
                _ => None,
            })
            .collect();
        for s in &blk.stmts {
            out.entry(s.loc()).or_default().extend(sw.iter().copied());
        }
    }
    out
}
