use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::error::{ErrorKind, TypeError};
use crate::lang::places::{conflicts, type_at};
use crate::lang::*;

/// A place expression tagged with the qualifier it was borrowed at.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Loan {
    pub qual: OwnQual,
    pub place: PlaceExpr,
}

pub type LoanSet = BTreeSet<Loan>;

impl Loan {
    pub fn new(qual: OwnQual, place: PlaceExpr) -> Loan {
        Loan { qual, place }
    }
}

impl fmt::Display for Loan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.qual, self.place)
    }
}

pub fn show_loans(ls: &LoanSet) -> String {
    let parts: Vec<String> = ls.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Variable types, concrete provenance loan sets and outlives constraints.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    pub vars: Vec<(Var, Ty)>,
    pub provs: BTreeMap<String, LoanSet>,
    /// Concrete constraints `(a, b)` meaning `a :> b`.
    pub constraints: BTreeSet<(String, String)>,
    pub abstracts: BTreeSet<String>,
    pub abstract_outlives: BTreeSet<(String, String)>,
}

/// Least fixpoint of `provs[b] ⊇ provs[a]` for every constraint `(a, b)`.
pub fn propagate_loans(provs: &mut BTreeMap<String, LoanSet>, constraints: &BTreeSet<(String, String)>) {
    loop {
        let mut changed = false;
        for (a, b) in constraints {
            let from = provs.get(a).cloned().unwrap_or_default();
            if let Some(to) = provs.get_mut(b) {
                for l in from {
                    changed |= to.insert(l);
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Options altering dereference resolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResolveOpts {
    /// Treat every reference as `uniq`.
    pub all_uniq: bool,
}

impl TypeEnv {
    /// Environment at entry to a function body.
    pub fn for_fn(f: &FnDef) -> TypeEnv {
        TypeEnv {
            vars: vec![(f.param.clone(), f.param_ty.clone())],
            abstracts: f.provs.iter().cloned().collect(),
            abstract_outlives: f.outlives.iter().cloned().collect(),
            ..TypeEnv::default()
        }
    }

    pub fn lookup(&self, x: &str) -> Option<&Ty> {
        self.vars.iter().rev().find(|(v, _)| v == x).map(|(_, t)| t)
    }

    pub fn has_var(&self, x: &str) -> bool {
        self.lookup(x).is_some()
    }

    pub fn push_var(&mut self, x: &str, ty: Ty) {
        self.vars.push((x.to_string(), ty));
    }

    pub fn pop_var(&mut self, x: &str) -> Option<Ty> {
        let i = self.vars.iter().rposition(|(v, _)| v == x)?;
        Some(self.vars.remove(i).1)
    }

    pub fn prov_in_scope(&self, p: &Prov) -> bool {
        match p {
            Prov::Concrete(r) => self.provs.contains_key(r),
            Prov::Abstract(a) => self.abstracts.contains(a),
        }
    }

    /// Loans of a concrete provenance; abstract provenances have none.
    pub fn loans_of(&self, p: &Prov) -> LoanSet {
        match p {
            Prov::Concrete(r) => self.provs.get(r).cloned().unwrap_or_default(),
            Prov::Abstract(_) => LoanSet::new(),
        }
    }

    /// Type of a place expression. Passing through a moved reference is an error.
    pub fn place_ty(&self, p: &PlaceExpr) -> Result<Ty, TypeError> {
        let root = self
            .lookup(&p.root)
            .ok_or_else(|| TypeError::new(ErrorKind::UnknownVariable, format!("`{}`", p.root)))?;
        for ptr in p.pointer_prefixes() {
            let t = type_at(root, &ptr.path).ok_or_else(|| invalid(p))?;
            if t.contains_dead() {
                return Err(TypeError::new(
                    ErrorKind::UseAfterMove,
                    format!("`{ptr}` was moved"),
                ));
            }
            if !matches!(t, Ty::Ref(..)) {
                return Err(invalid(p));
            }
        }
        let mut t = root;
        let mut dead = false;
        for s in &p.path {
            while let Ty::Dead(inner) = t {
                dead = true;
                t = inner;
            }
            t = type_at(t, &[*s]).ok_or_else(|| invalid(p))?;
        }
        if dead && !matches!(t, Ty::Dead(_)) {
            return Ok(Ty::Dead(Box::new(t.clone())));
        }
        Ok(t.clone())
    }

    /// Replace the type stored at a deref-free place.
    pub fn set_place_ty(&mut self, p: &Place, ty: Ty) -> Result<(), TypeError> {
        fn go(t: &mut Ty, fields: &[usize], ty: Ty) -> bool {
            match fields.split_first() {
                None => {
                    *t = ty;
                    true
                }
                Some((n, rest)) => {
                    if let Ty::Dead(inner) = t {
                        // Reviving one component of a moved tuple keeps the rest dead.
                        let Ty::Tuple(ts) = inner.as_ref() else {
                            return false;
                        };
                        let parts = ts.iter().map(|x| Ty::Dead(Box::new(x.clone()))).collect();
                        *t = Ty::Tuple(parts);
                    }
                    match t {
                        Ty::Tuple(ts) if *n < ts.len() => go(&mut ts[*n], rest, ty),
                        _ => false,
                    }
                }
            }
        }
        let i = self
            .vars
            .iter()
            .rposition(|(v, _)| *v == p.root)
            .ok_or_else(|| TypeError::new(ErrorKind::UnknownVariable, format!("`{}`", p.root)))?;
        if go(&mut self.vars[i].1, &p.fields, ty) {
            Ok(())
        } else {
            Err(invalid(&p.to_expr()))
        }
    }

    /// Record `a :> b`.
    pub fn add_outlives(&mut self, a: &Prov, b: &Prov) -> Result<(), TypeError> {
        if a == b {
            return Ok(());
        }
        for p in [a, b] {
            if !self.prov_in_scope(p) {
                return Err(TypeError::new(
                    ErrorKind::UnknownProvenance,
                    format!("`{p}` is not in scope"),
                ));
            }
        }
        match (a, b) {
            (Prov::Concrete(x), Prov::Concrete(y)) => {
                self.constraints.insert((x.clone(), y.clone()));
                self.propagate();
                Ok(())
            }
            (Prov::Abstract(x), Prov::Abstract(y)) => {
                if self.abstract_outlives_holds(x, y) {
                    Ok(())
                } else {
                    Err(TypeError::new(
                        ErrorKind::OwnershipViolation,
                        format!("`{x}: {y}` is not declared"),
                    ))
                }
            }
            _ => Err(TypeError::new(
                ErrorKind::ArityOrProvenanceMismatch,
                format!("cannot relate local provenance and signature provenance (`{a} :> {b}`)"),
            )),
        }
    }

    fn abstract_outlives_holds(&self, x: &str, y: &str) -> bool {
        let mut seen = BTreeSet::from([x.to_string()]);
        let mut stack = vec![x.to_string()];
        while let Some(n) = stack.pop() {
            if n == y {
                return true;
            }
            for (a, b) in &self.abstract_outlives {
                if *a == n && seen.insert(b.clone()) {
                    stack.push(b.clone());
                }
            }
        }
        false
    }

    /// Close loan sets under the recorded constraints.
    pub fn propagate(&mut self) {
        propagate_loans(&mut self.provs, &self.constraints);
    }

    /// Loans that forbid an `omega` use of `p`.
    pub fn live_conflicts(&self, omega: OwnQual, p: &PlaceExpr) -> Vec<(String, Loan)> {
        let mut out = Vec::new();
        for (r, ls) in &self.provs {
            for l in ls {
                if (omega == OwnQual::Uniq || l.qual == OwnQual::Uniq) && conflicts(p, &l.place) {
                    out.push((r.clone(), l.clone()));
                }
            }
        }
        out
    }

    /// Dereference resolution without the liveness check.
    pub fn resolve(&self, omega: OwnQual, p: &PlaceExpr, opts: ResolveOpts) -> Result<LoanSet, TypeError> {
        let mut out = LoanSet::from([Loan::new(omega, p.clone())]);
        let Some((ptr, suffix)) = p.split_last_deref() else {
            return Ok(out);
        };
        let pty = self.place_ty(&ptr)?;
        let Ty::Ref(q, rho, _) = pty else {
            return Err(invalid(p));
        };
        let granted = if opts.all_uniq { OwnQual::Uniq } else { q };
        if !omega.usable_as(granted) {
            return Err(TypeError::new(
                ErrorKind::OwnershipViolation,
                format!("cannot use `{p}` uniquely through a shared reference `{ptr}`"),
            ));
        }
        if let Prov::Concrete(r) = &rho {
            for l in self.provs.get(r).into_iter().flatten() {
                out.insert(Loan::new(omega, l.place.extend(&suffix)));
            }
        }
        Ok(out)
    }

    /// The ownership-safety judgment: liveness check on `p` followed by resolution.
    pub fn ownership_safe(&self, omega: OwnQual, p: &PlaceExpr) -> Result<LoanSet, TypeError> {
        if let Some((r, l)) = self.live_conflicts(omega, p).into_iter().next() {
            return Err(TypeError::new(
                ErrorKind::OwnershipViolation,
                format!("cannot use `{p}` as {omega}: loan `{l}` of `{r}` is live"),
            ));
        }
        self.resolve(omega, p, ResolveOpts::default())
    }

    /// Places reachable through the references inside `p`.
    pub fn loans(
        &self,
        omega: OwnQual,
        p: &PlaceExpr,
        ty: &Ty,
        opts: ResolveOpts,
    ) -> Result<BTreeSet<PlaceExpr>, TypeError> {
        let mut out = BTreeSet::new();
        for p1 in crate::lang::places::refs_with(omega, p, ty, opts.all_uniq) {
            for l in self.resolve(omega, &p1, opts)? {
                out.insert(l.place);
            }
        }
        Ok(out)
    }

    /// Remove loans rooted at `x`, returning the provenances that lost any.
    pub fn gc_var(&mut self, x: &str) -> BTreeSet<String> {
        let mut hit = BTreeSet::new();
        for (r, ls) in self.provs.iter_mut() {
            let before = ls.len();
            ls.retain(|l| l.place.root != x);
            if ls.len() != before {
                hit.insert(r.clone());
            }
        }
        hit
    }

    /// Clear the loans of provenances no longer named by a live variable or by `keep`.
    pub fn gc_unused(&mut self, keep: &Ty) {
        let vars = &self.vars;
        for (r, ls) in self.provs.iter_mut() {
            let used = keep.mentions_prov(r)
                || vars.iter().any(|(_, t)| !matches!(t, Ty::Dead(_)) && t.mentions_prov(r));
            if !used {
                ls.clear();
            }
        }
    }

    pub fn remove_prov(&mut self, r: &str) {
        self.provs.remove(r);
        self.constraints.retain(|(a, b)| a != r && b != r);
    }

    /// Merge of two branch environments.
    pub fn join(&self, other: &TypeEnv) -> TypeEnv {
        let mut out = self.clone();
        for (v, t) in out.vars.iter_mut() {
            if let Some(t2) = other.lookup(v) {
                *t = join_ty(t, t2);
            }
        }
        for (r, ls) in &other.provs {
            if let Some(mine) = out.provs.get_mut(r) {
                mine.extend(ls.iter().cloned());
            }
        }
        out.constraints.extend(
            other
                .constraints
                .iter()
                .filter(|(a, b)| out.provs.contains_key(a) && out.provs.contains_key(b))
                .cloned(),
        );
        out.propagate();
        out
    }
}

fn join_ty(a: &Ty, b: &Ty) -> Ty {
    match (a, b) {
        (Ty::Dead(_), _) => a.clone(),
        (_, Ty::Dead(_)) => Ty::Dead(Box::new(a.clone())),
        (Ty::Tuple(xs), Ty::Tuple(ys)) if xs.len() == ys.len() => {
            Ty::Tuple(xs.iter().zip(ys).map(|(x, y)| join_ty(x, y)).collect())
        }
        _ => a.clone(),
    }
}

fn invalid(p: &PlaceExpr) -> TypeError {
    TypeError::new(ErrorKind::InvalidPlace, format!("`{p}` does not fit its type"))
}
