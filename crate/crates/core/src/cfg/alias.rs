//! Flow-insensitive loan sets computed from borrows and subtyping constraints.

use std::collections::{BTreeMap, BTreeSet};

use crate::flow::policy::{scope_ty, PointsTo};
use crate::lang::*;
use crate::ownership::TypedFn;

#[derive(Clone, Debug, Default)]
pub struct Aliases {
    pub vars: Vec<(Var, Ty)>,
    pub loans: BTreeMap<String, BTreeSet<PlaceExpr>>,
    /// `(a, b)`: everything `a` names flows into `b`.
    pub outlives: BTreeSet<(String, String)>,
}

impl PointsTo for Aliases {
    fn ty_of(&self, p: &PlaceExpr) -> Option<Ty> {
        scope_ty(&self.vars, p)
    }

    fn targets(&self, r: &Prov) -> BTreeSet<PlaceExpr> {
        match r {
            Prov::Concrete(n) => self.loans.get(n).cloned().unwrap_or_default(),
            Prov::Abstract(_) => BTreeSet::new(),
        }
    }
}

fn concrete(p: &Prov) -> Option<&str> {
    match p {
        Prov::Concrete(n) => Some(n),
        Prov::Abstract(_) => None,
    }
}

/// Constraints implied by using a `t1` where a `t2` is expected.
pub fn outlives_pairs(t1: &Ty, t2: &Ty, out: &mut BTreeSet<(String, String)>) {
    match (t1, t2) {
        (Ty::Dead(a), b) => outlives_pairs(a, b, out),
        (a, Ty::Dead(b)) => outlives_pairs(a, b, out),
        (Ty::Tuple(a), Ty::Tuple(b)) => {
            for (x, y) in a.iter().zip(b) {
                outlives_pairs(x, y, out);
            }
        }
        (Ty::Ref(q, p1, i1), Ty::Ref(_, p2, i2)) => {
            if let (Some(a), Some(b)) = (concrete(p1), concrete(p2)) {
                if a != b {
                    out.insert((a.to_string(), b.to_string()));
                }
            }
            outlives_pairs(i1, i2, out);
            if *q == OwnQual::Uniq {
                outlives_pairs(i2, i1, out);
            }
        }
        _ => {}
    }
}

impl Aliases {
    pub fn compute(f: &TypedFn) -> Aliases {
        let mut a = Aliases {
            vars: vec![(f.def.param.clone(), f.def.param_ty.clone())],
            ..Aliases::default()
        };
        let Some(body) = f.body() else {
            return a;
        };
        let mut borrows = Vec::new();
        body.walk(&mut |e| match &e.kind {
            ExprKind::Let { var, ty, .. } => a.vars.push((var.clone(), ty.clone())),
            ExprKind::LetProv(names, _) => {
                for n in names {
                    a.loans.entry(n.clone()).or_default();
                }
            }
            ExprKind::Borrow(_, r, p) => borrows.push((r.clone(), p.clone())),
            _ => {}
        });
        let ty_of = |e: &Expr| f.fact(e.id).ty.clone().unwrap_or(Ty::Unit);
        let mut pairs = BTreeSet::new();
        body.walk(&mut |e| match &e.kind {
            ExprKind::Let { ty, rhs, .. } => outlives_pairs(&ty_of(rhs), ty, &mut pairs),
            ExprKind::Assign(p, rhs) => {
                if let Some(t) = scope_ty(&a.vars, p) {
                    outlives_pairs(&ty_of(rhs), &t, &mut pairs);
                }
            }
            ExprKind::Call { arg, .. } => {
                let Some(call) = &f.fact(e.id).call else {
                    return;
                };
                if let Some(t) = scope_ty(&a.vars, &arg.to_expr()) {
                    outlives_pairs(&t, &call.param_ty, &mut pairs);
                }
                if let Some(ret) = &f.fact(e.id).ty {
                    outlives_pairs(&call.ret_ty, ret, &mut pairs);
                }
                for env in [&f.fact(e.id).query_env].into_iter().flatten() {
                    pairs.extend(env.constraints.iter().cloned());
                }
            }
            _ => {}
        });
        a.outlives = pairs;
        loop {
            let mut changed = false;
            for (r, p) in &borrows {
                let mut add = BTreeSet::from([p.clone()]);
                if let Some((ptr, suffix)) = p.split_last_deref() {
                    if let Some(Ty::Ref(_, rho, _)) = a.ty_of(&ptr) {
                        add.extend(a.targets(&rho).iter().map(|q| q.extend(&suffix)));
                    }
                }
                let set = a.loans.entry(r.clone()).or_default();
                for q in add {
                    changed |= set.insert(q);
                }
            }
            for (x, y) in &a.outlives {
                let from = a.loans.get(x).cloned().unwrap_or_default();
                let to = a.loans.entry(y.clone()).or_default();
                for q in from {
                    changed |= to.insert(q);
                }
            }
            if !changed {
                break;
            }
        }
        a
    }
}
