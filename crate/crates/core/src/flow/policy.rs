//! Mode-dependent pointer resolution shared by both engines.

use std::collections::BTreeSet;

use super::mode::Mode;
use super::theta::{Kappa, Theta};
use crate::lang::places::{refs_with, theta_keys, type_at};
use crate::lang::*;
use crate::ownership::TypeEnv;

/// Source of reference types and provenance targets.
pub trait PointsTo {
    /// Type of the place expression `p`, ignoring moves.
    fn ty_of(&self, p: &PlaceExpr) -> Option<Ty>;
    /// Concrete places a provenance may name.
    fn targets(&self, r: &Prov) -> BTreeSet<PlaceExpr>;
}

impl PointsTo for TypeEnv {
    fn ty_of(&self, p: &PlaceExpr) -> Option<Ty> {
        scope_ty(&self.vars, p)
    }

    fn targets(&self, r: &Prov) -> BTreeSet<PlaceExpr> {
        self.loans_of(r).into_iter().map(|l| l.place).collect()
    }
}

/// Type of `p` given the types of the variables in scope.
pub fn scope_ty(scope: &[(Var, Ty)], p: &PlaceExpr) -> Option<Ty> {
    let (_, t) = scope.iter().rev().find(|(v, _)| *v == p.root)?;
    type_at(t, &p.path).map(Ty::revive)
}

/// Places `p` may denote: itself plus the targets behind its last dereference.
/// Under `RefBlind` every in-scope key of the same type is added.
pub fn resolve(
    mode: Mode,
    pts: &dyn PointsTo,
    th: &Theta,
    scope: &[(Var, Ty)],
    p: &PlaceExpr,
) -> BTreeSet<PlaceExpr> {
    let mut out = BTreeSet::from([p.clone()]);
    let Some((ptr, suffix)) = p.split_last_deref() else {
        return out;
    };
    if let Some(Ty::Ref(_, rho, _)) = pts.ty_of(&ptr) {
        for q in pts.targets(&rho) {
            out.insert(q.extend(&suffix));
        }
    }
    if mode == Mode::RefBlind {
        if let Some(pty) = scope_ty(scope, p) {
            for k in th.keys() {
                if scope_ty(scope, k).is_some_and(|kt| kt.same_erased(&pty)) {
                    out.insert(k.clone());
                }
            }
        }
    }
    out
}

/// Places reachable through the `omega`-usable references inside the argument `p: ty`.
pub fn call_loans(
    mode: Mode,
    pts: &dyn PointsTo,
    th: &Theta,
    scope: &[(Var, Ty)],
    omega: OwnQual,
    p: &PlaceExpr,
    ty: &Ty,
) -> BTreeSet<PlaceExpr> {
    let mut out = BTreeSet::new();
    for p1 in refs_with(omega, p, ty, mode == Mode::MutBlind) {
        out.extend(resolve(mode, pts, th, scope, &p1));
    }
    out
}

/// Dependencies of reading `p`.
pub fn read_kappa(mode: Mode, pts: &dyn PointsTo, th: &Theta, scope: &[(Var, Ty)], p: &PlaceExpr) -> Kappa {
    th.union_of(&resolve(mode, pts, th, scope, p))
}

/// Keys of every variable in scope, in order.
pub fn scope_keys(scope: &[(Var, Ty)]) -> Vec<PlaceExpr> {
    let mut out = Vec::new();
    for (v, t) in scope {
        out.extend(theta_keys(v, t));
    }
    out
}

/// Each key depends on a synthetic location for itself and for the pointers it is reached through.
pub fn fine_init(keys: &[PlaceExpr], base: u32) -> Theta {
    let id = |q: &PlaceExpr| keys.iter().position(|k| k == q).map(|i| base + i as u32);
    let mut th = Theta::new();
    for p in keys {
        let mut k = Kappa::new();
        k.extend(id(p));
        for q in p.pointer_prefixes() {
            k.extend(id(&q));
        }
        th.set(p.clone(), k);
    }
    th
}

/// Like `fine_init`, but each key also depends on everything stored beneath it.
pub fn coarse_init(keys: &[PlaceExpr], base: u32) -> Theta {
    let mut th = fine_init(keys, base);
    for (i, k) in keys.iter().enumerate() {
        for (p, v) in th.map.iter_mut() {
            if p.is_prefix_of(k) {
                v.insert(base + i as u32);
            }
        }
    }
    th
}
