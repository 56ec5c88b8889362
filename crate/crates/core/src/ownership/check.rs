use std::collections::{BTreeMap, BTreeSet};

use super::env::{LoanSet, ResolveOpts, TypeEnv};
use super::error::{ErrorKind, TypeError};
use crate::lang::*;

/// Typing facts cached for one location.
#[derive(Clone, Debug, Default)]
pub struct LocFacts {
    pub ty: Option<Ty>,
    pub env_before: Option<TypeEnv>,
    /// Environment at the moment of the ownership query made by this node.
    pub query_env: Option<TypeEnv>,
    pub loans: Option<LoanSet>,
    pub moved: bool,
    pub call: Option<CallFact>,
}

#[derive(Clone, Debug)]
pub struct CallFact {
    pub param_ty: Ty,
    pub ret_ty: Ty,
    /// Abstract provenance name of the callee to the provenance supplied here.
    pub inst: BTreeMap<String, Prov>,
    pub uniq_loans: BTreeSet<PlaceExpr>,
    pub shrd_loans: BTreeSet<PlaceExpr>,
}

#[derive(Clone, Debug)]
pub struct TypedFn {
    pub def: FnDef,
    pub facts: Vec<LocFacts>,
    pub entry_env: TypeEnv,
}

impl TypedFn {
    pub fn fact(&self, id: u32) -> &LocFacts {
        &self.facts[id as usize]
    }

    pub fn body(&self) -> Option<&Expr> {
        self.def.body.as_ref()
    }
}

#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub program: Program,
    pub fns: BTreeMap<String, TypedFn>,
}

impl TypedProgram {
    pub fn func(&self, name: &str) -> Option<&TypedFn> {
        self.fns.get(name)
    }
}

/// Per-function outcome of checking a whole program.
#[derive(Clone, Debug)]
pub struct FnReport {
    pub name: String,
    pub result: Result<TypedFn, TypeError>,
}

/// Check every function, collecting failures per function.
pub fn check_report(p: &Program) -> Vec<FnReport> {
    let p = if p.fns.iter().all(|f| f.body.as_ref().is_none_or(Expr::is_located)) {
        p.clone()
    } else {
        assign_locations(p.clone())
    };
    let mut names = BTreeSet::new();
    p.fns
        .iter()
        .map(|f| {
            let result = if !names.insert(f.name.clone()) {
                Err(TypeError::new(ErrorKind::Shadowing, format!("function `{}` defined twice", f.name)))
            } else {
                check_fn(&p, f)
            };
            FnReport {
                name: f.name.clone(),
                result,
            }
        })
        .collect()
}

pub fn typecheck(p: &Program) -> Result<TypedProgram, Vec<(String, TypeError)>> {
    let reports = check_report(p);
    let mut errors = Vec::new();
    let mut fns = BTreeMap::new();
    for r in reports {
        match r.result {
            Ok(t) => {
                fns.insert(r.name, t);
            }
            Err(e) => errors.push((r.name, e)),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let program = Program {
        fns: p.fns.iter().map(|f| fns[&f.name].def.clone()).collect(),
    };
    Ok(TypedProgram { program, fns })
}

pub fn check_fn(p: &Program, f: &FnDef) -> Result<TypedFn, TypeError> {
    let mut f = f.clone();
    if let Some(b) = &f.body {
        if !b.is_located() {
            let q = assign_locations(Program { fns: vec![f.clone()] });
            f = q.fns.into_iter().next().unwrap();
        }
    }
    check_signature(&f)?;
    let entry_env = TypeEnv::for_fn(&f);
    let mut facts = Vec::new();
    if let Some(body) = &f.body {
        check_unique_names(&f, body)?;
        facts = vec![LocFacts::default(); body.count() as usize];
        let mut ck = Checker { prog: p, facts };
        let mut env = entry_env.clone();
        let t = ck.expr(&mut env, body)?;
        subtype(&mut env, &t, &f.ret_ty).map_err(|e| e.at(body.id, body.span))?;
        facts = ck.facts;
    }
    Ok(TypedFn {
        def: f,
        facts,
        entry_env,
    })
}

fn check_signature(f: &FnDef) -> Result<(), TypeError> {
    let declared: BTreeSet<&String> = f.provs.iter().collect();
    if declared.len() != f.provs.len() {
        return Err(TypeError::new(ErrorKind::Shadowing, "provenance declared twice"));
    }
    for (a, b) in &f.outlives {
        if !declared.contains(a) || !declared.contains(b) {
            return Err(TypeError::new(ErrorKind::UnknownProvenance, format!("`{a}: {b}`")));
        }
    }
    for t in [&f.param_ty, &f.ret_ty] {
        let mut ps = Vec::new();
        t.provs(&mut ps);
        for p in ps {
            if !p.is_abstract() || !declared.contains(&p.name().to_string()) {
                return Err(TypeError::new(
                    ErrorKind::UnknownProvenance,
                    format!("`{p}` in the signature of `{}` is not declared", f.name),
                ));
            }
        }
    }
    Ok(())
}

fn check_unique_names(f: &FnDef, body: &Expr) -> Result<(), TypeError> {
    let mut seen = BTreeSet::from([f.param.clone()]);
    let mut provs: BTreeSet<String> = f.provs.iter().cloned().collect();
    let mut err = None;
    body.walk(&mut |e| {
        let clash = match &e.kind {
            ExprKind::Let { var, .. } => (!seen.insert(var.clone())).then(|| format!("variable `{var}`")),
            ExprKind::LetProv(names, _) => names
                .iter()
                .find(|n| !provs.insert((*n).clone()))
                .map(|n| format!("provenance `{n}`")),
            _ => None,
        };
        if let (Some(what), None) = (clash, &err) {
            err = Some(TypeError::new(ErrorKind::Shadowing, format!("{what} is bound twice")).at(e.id, e.span));
        }
    });
    err.map_or(Ok(()), Err)
}

/// `t1 ≲ t2`: same shape, equal qualifiers, provenance mismatches become outlives constraints.
pub fn subtype(env: &mut TypeEnv, t1: &Ty, t2: &Ty) -> Result<(), TypeError> {
    let mismatch = || TypeError::new(ErrorKind::TypeMismatch, format!("expected `{t2}`, found `{t1}`"));
    match (t1, t2) {
        (Ty::Unit, Ty::Unit) | (Ty::U32, Ty::U32) | (Ty::Bool, Ty::Bool) => Ok(()),
        (Ty::Tuple(a), Ty::Tuple(b)) if a.len() == b.len() => {
            for (x, y) in a.iter().zip(b) {
                subtype(env, x, y).map_err(|_| mismatch())?;
            }
            Ok(())
        }
        (Ty::Ref(q1, p1, i1), Ty::Ref(q2, p2, i2)) if q1 == q2 => {
            env.add_outlives(p1, p2)?;
            subtype(env, i1, i2).map_err(|_| mismatch())?;
            if *q1 == OwnQual::Uniq {
                subtype(env, i2, i1).map_err(|_| mismatch())?;
            }
            Ok(())
        }
        _ => Err(mismatch()),
    }
}

fn check_wf(env: &TypeEnv, t: &Ty) -> Result<(), TypeError> {
    let mut ps = Vec::new();
    t.provs(&mut ps);
    for p in ps {
        if !env.prov_in_scope(&p) {
            return Err(TypeError::new(ErrorKind::UnknownProvenance, format!("`{p}` is not in scope")));
        }
    }
    if t.contains_dead() {
        return Err(TypeError::new(ErrorKind::TypeMismatch, "dead type in source"));
    }
    Ok(())
}

fn is_dead(t: &Ty) -> bool {
    matches!(t, Ty::Dead(_))
}

struct Checker<'a> {
    prog: &'a Program,
    facts: Vec<LocFacts>,
}

impl Checker<'_> {
    fn expr(&mut self, env: &mut TypeEnv, e: &Expr) -> Result<Ty, TypeError> {
        self.facts[e.id as usize].env_before = Some(env.clone());
        let t = self.expr_inner(env, e).map_err(|err| err.at(e.id, e.span))?;
        self.facts[e.id as usize].ty = Some(t.clone());
        Ok(t)
    }

    fn fact(&mut self, e: &Expr) -> &mut LocFacts {
        &mut self.facts[e.id as usize]
    }

    /// A read of `p`: a copy when its type is copyable, else a move.
    fn use_place(&mut self, env: &mut TypeEnv, e: &Expr, p: &PlaceExpr, mark: bool) -> Result<Ty, TypeError> {
        let ty = env.place_ty(p)?;
        if ty.contains_dead() {
            return Err(TypeError::new(ErrorKind::UseAfterMove, format!("`{p}` was moved")));
        }
        self.fact(e).query_env = Some(env.clone());
        if ty.is_copyable() {
            let loans = env.ownership_safe(OwnQual::Shrd, p)?;
            self.fact(e).loans = Some(loans);
        } else {
            let Some(pl) = p.as_place() else {
                return Err(TypeError::new(
                    ErrorKind::OwnershipViolation,
                    format!("cannot move `{p}` out of a reference"),
                ));
            };
            let loans = env.ownership_safe(OwnQual::Uniq, p)?;
            let f = self.fact(e);
            f.loans = Some(loans);
            f.moved = true;
            if mark {
                env.set_place_ty(&pl, Ty::Dead(Box::new(ty.clone())))?;
            }
        }
        Ok(ty)
    }

    fn expr_inner(&mut self, env: &mut TypeEnv, e: &Expr) -> Result<Ty, TypeError> {
        match &e.kind {
            ExprKind::Const(l) => Ok(match l {
                Lit::Unit => Ty::Unit,
                Lit::U32(_) => Ty::U32,
                Lit::Bool(_) => Ty::Bool,
            }),
            ExprKind::PlaceUse(p) => self.use_place(env, e, p, true),
            ExprKind::Tuple(es) => {
                let mut ts = Vec::new();
                for x in es {
                    ts.push(self.expr(env, x)?);
                }
                Ok(Ty::Tuple(ts))
            }
            ExprKind::Let { var, ty, rhs, body, .. } => {
                check_wf(env, ty)?;
                let t1 = self.expr(env, rhs)?;
                subtype(env, &t1, ty)?;
                env.push_var(var, ty.clone());
                let t2 = self.expr(env, body)?;
                env.pop_var(var);
                for r in env.gc_var(var) {
                    let live = env.vars.iter().any(|(_, t)| !is_dead(t) && t.mentions_prov(&r));
                    if t2.mentions_prov(&r) || live {
                        return Err(TypeError::new(
                            ErrorKind::EscapingBorrow,
                            format!("`{var}` goes out of scope while borrowed through `{r}`"),
                        ));
                    }
                }
                env.gc_unused(&t2);
                Ok(t2)
            }
            ExprKind::Assign(p, rhs) => {
                let t = self.expr(env, rhs)?;
                let target = env.place_ty(p)?;
                self.fact(e).query_env = Some(env.clone());
                let loans = env.ownership_safe(OwnQual::Uniq, p)?;
                self.fact(e).loans = Some(loans);
                match p.as_place() {
                    Some(pl) => {
                        let declared = target.revive();
                        subtype(env, &t, &declared)?;
                        env.set_place_ty(&pl, declared)?;
                    }
                    None => {
                        if target.contains_dead() {
                            return Err(TypeError::new(ErrorKind::UseAfterMove, format!("`{p}` was moved")));
                        }
                        subtype(env, &t, &target)?;
                    }
                }
                Ok(Ty::Unit)
            }
            ExprKind::Seq(a, b) => {
                self.expr(env, a)?;
                self.expr(env, b)
            }
            ExprKind::Borrow(q, r, p) => {
                let Some(existing) = env.provs.get(r) else {
                    return Err(TypeError::new(
                        ErrorKind::UnknownProvenance,
                        format!("`{r}` is not a local provenance in scope"),
                    ));
                };
                if !existing.is_empty() {
                    return Err(TypeError::new(
                        ErrorKind::OwnershipViolation,
                        format!("provenance `{r}` already holds loans"),
                    ));
                }
                let ty = env.place_ty(p)?;
                if ty.contains_dead() {
                    return Err(TypeError::new(ErrorKind::UseAfterMove, format!("`{p}` was moved")));
                }
                self.fact(e).query_env = Some(env.clone());
                let loans = env.ownership_safe(*q, p)?;
                self.fact(e).loans = Some(loans.clone());
                env.provs.insert(r.clone(), loans);
                env.propagate();
                Ok(Ty::Ref(*q, Prov::Concrete(r.clone()), Box::new(ty)))
            }
            ExprKind::LetProv(names, body) => {
                for n in names {
                    if env.abstracts.contains(n) {
                        return Err(TypeError::new(ErrorKind::Shadowing, format!("provenance `{n}`")));
                    }
                    env.provs.insert(n.clone(), LoanSet::new());
                }
                let t = self.expr(env, body)?;
                for n in names {
                    if t.mentions_prov(n) {
                        return Err(TypeError::new(
                            ErrorKind::EscapingBorrow,
                            format!("result type `{t}` outlives `{n}`"),
                        ));
                    }
                    env.remove_prov(n);
                }
                Ok(t)
            }
            ExprKind::If(c, th, el) => {
                let tc = self.expr(env, c)?;
                if tc != Ty::Bool {
                    return Err(TypeError::new(ErrorKind::TypeMismatch, format!("condition has type `{tc}`")));
                }
                let mut e2 = env.clone();
                let t2 = self.expr(&mut e2, th)?;
                let mut e3 = env.clone();
                let t3 = self.expr(&mut e3, el)?;
                subtype(&mut e3, &t3, &t2)?;
                *env = e2.join(&e3);
                Ok(t2)
            }
            ExprKind::While(c, body) => {
                let mut head = env.clone();
                for _ in 0..256 {
                    let mut ec = head.clone();
                    let tc = self.expr(&mut ec, c)?;
                    if tc != Ty::Bool {
                        return Err(TypeError::new(ErrorKind::TypeMismatch, format!("condition has type `{tc}`")));
                    }
                    let mut eb = ec.clone();
                    self.expr(&mut eb, body)?;
                    let next = head.join(&eb);
                    if next == head {
                        *env = ec;
                        return Ok(Ty::Unit);
                    }
                    head = next;
                }
                Err(TypeError::new(ErrorKind::NoFixpoint, "loop environment does not stabilize"))
            }
            ExprKind::Call { func, provs, arg } => self.call(env, e, func, provs, arg),
        }
    }

    fn call(&mut self, env: &mut TypeEnv, e: &Expr, func: &str, provs: &[Prov], arg: &Place) -> Result<Ty, TypeError> {
        let callee = self
            .prog
            .func(func)
            .ok_or_else(|| TypeError::new(ErrorKind::UnknownFunction, format!("`{func}`")))?;
        if provs.len() != callee.provs.len() {
            return Err(TypeError::new(
                ErrorKind::ArityOrProvenanceMismatch,
                format!("`{func}` expects {} provenances, got {}", callee.provs.len(), provs.len()),
            ));
        }
        for p in provs {
            if !env.prov_in_scope(p) {
                return Err(TypeError::new(ErrorKind::UnknownProvenance, format!("`{p}` is not in scope")));
            }
        }
        let inst: BTreeMap<String, Prov> = callee.provs.iter().cloned().zip(provs.iter().cloned()).collect();
        let map = |p: &Prov| match p {
            Prov::Abstract(a) => inst.get(a).cloned().unwrap_or_else(|| p.clone()),
            c => c.clone(),
        };
        let param_ty = callee.param_ty.subst(&map);
        let ret_ty = callee.ret_ty.subst(&map);
        let pe = arg.to_expr();
        let ty = if arg.root == UNIT_PARAM && arg.fields.is_empty() && !env.has_var(UNIT_PARAM) {
            Ty::Unit
        } else {
            self.use_place(env, e, &pe, false)?
        };
        subtype(env, &ty, &param_ty)?;
        for (a, b) in &callee.outlives {
            env.add_outlives(&map(&Prov::Abstract(a.clone())), &map(&Prov::Abstract(b.clone())))?;
        }
        let opts = ResolveOpts::default();
        let uniq_loans = env.loans(OwnQual::Uniq, &pe, &param_ty, opts)?;
        let shrd_loans = env.loans(OwnQual::Shrd, &pe, &param_ty, opts)?;
        let f = self.fact(e);
        f.query_env = Some(env.clone());
        f.call = Some(CallFact {
            param_ty,
            ret_ty: ret_ty.clone(),
            inst,
            uniq_loans,
            shrd_loans,
        });
        if f.moved {
            env.set_place_ty(arg, Ty::Dead(Box::new(ty)))?;
        }
        Ok(ret_ty)
    }
}
