//! Metafunctions on paths, places and types.

use std::collections::BTreeSet;

use super::ast::*;

/// Two place expressions are disjoint when their roots differ or neither path
/// is a prefix of the other.
pub fn disjoint(p1: &PlaceExpr, p2: &PlaceExpr) -> bool {
    !conflicts(p1, p2)
}

pub fn conflicts(p1: &PlaceExpr, p2: &PlaceExpr) -> bool {
    p1.is_prefix_of(p2) || p2.is_prefix_of(p1)
}

/// The root and every field projection reachable without crossing a reference.
pub fn places_under(root: &str, ty: &Ty) -> BTreeSet<Place> {
    fn go(p: Place, ty: &Ty, out: &mut BTreeSet<Place>) {
        if let Ty::Tuple(ts) = ty {
            for (i, t) in ts.iter().enumerate() {
                let mut q = p.clone();
                q.fields.push(i);
                go(q, t, out);
            }
        }
        out.insert(p);
    }
    let mut out = BTreeSet::new();
    go(Place::var(root), &ty.revive(), &mut out);
    out
}

/// All place expressions rooted at `root` that a type admits, following
/// fields and dereferences.
pub fn theta_keys(root: &str, ty: &Ty) -> BTreeSet<PlaceExpr> {
    fn go(p: PlaceExpr, ty: &Ty, out: &mut BTreeSet<PlaceExpr>) {
        match ty {
            Ty::Tuple(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    go(p.field(i), t, out);
                }
            }
            Ty::Ref(_, _, inner) => go(p.deref(), inner, out),
            Ty::Dead(t) => return go(p, t, out),
            _ => {}
        }
        out.insert(p);
    }
    let mut out = BTreeSet::new();
    go(PlaceExpr::var(root), ty, &mut out);
    out
}

/// Type reached by following `path` from a value of type `ty`.
pub fn type_at<'a>(ty: &'a Ty, path: &[Seg]) -> Option<&'a Ty> {
    let mut t = ty;
    for s in path {
        while let Ty::Dead(inner) = t {
            t = inner;
        }
        t = match (t, s) {
            (Ty::Tuple(ts), Seg::Field(n)) => ts.get(*n)?,
            (Ty::Ref(_, _, inner), Seg::Deref) => inner,
            _ => return None,
        };
    }
    Some(t)
}

/// A place expression for every reference reachable from `p` that may be used at `omega`.
pub fn refs(omega: OwnQual, p: &PlaceExpr, ty: &Ty) -> BTreeSet<PlaceExpr> {
    refs_with(omega, p, ty, false)
}

/// `refs`, optionally treating every reference as unique.
pub fn refs_with(omega: OwnQual, p: &PlaceExpr, ty: &Ty, all_uniq: bool) -> BTreeSet<PlaceExpr> {
    let mut out = BTreeSet::new();
    match ty {
        Ty::Unit | Ty::U32 | Ty::Bool | Ty::Dead(_) => {}
        Ty::Tuple(ts) => {
            for (i, t) in ts.iter().enumerate() {
                out.extend(refs_with(omega, &p.field(i), t, all_uniq));
            }
        }
        Ty::Ref(q, _, inner) => {
            let granted = if all_uniq { OwnQual::Uniq } else { *q };
            if omega.usable_as(granted) {
                let d = p.deref();
                out.extend(refs_with(omega, &d, inner, all_uniq));
                out.insert(d);
            }
        }
    }
    out
}
