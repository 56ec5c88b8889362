//! Flows from `@secure` data to `@insecure` externs, including implicit flows.

use std::collections::BTreeSet;

use serde::Serialize;

use super::slice::location_deps;
use crate::flow::{analyze_fn, FlowConfig, FlowResult, Kappa, Mode};
use crate::lang::*;
use crate::ownership::TypedProgram;

/// Secure marks and insecure sinks, read from annotations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IfcPolicy {
    pub secure_fns: BTreeSet<String>,
    pub insecure_fns: BTreeSet<String>,
}

impl IfcPolicy {
    pub fn from_program(p: &Program) -> IfcPolicy {
        let mut pol = IfcPolicy::default();
        for f in &p.fns {
            if f.secure {
                pol.secure_fns.insert(f.name.clone());
            }
            if f.insecure {
                pol.insecure_fns.insert(f.name.clone());
            }
        }
        pol
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IfcViolation {
    pub function: String,
    /// Location of the secure value: the bound expression or the secure call.
    pub source: u32,
    pub source_name: String,
    /// Location of the insecure call.
    pub sink: u32,
    pub sink_fn: String,
    /// Source, the locations linking it to the sink in location order, then the sink.
    pub chain: Vec<u32>,
}

struct Source {
    anchor: u32,
    name: String,
    locs: Kappa,
}

fn sources(f: &FnDef, r: &FlowResult, pol: &IfcPolicy) -> Vec<Source> {
    let mut out = Vec::new();
    let Some(b) = &f.body else { return out };
    b.walk(&mut |e| match &e.kind {
        ExprKind::Let { var, rhs, secure: true, .. } => {
            let mut locs = r.rec.kappa.get(&rhs.id).cloned().unwrap_or_default();
            locs.insert(rhs.id);
            out.push(Source {
                anchor: rhs.id,
                name: var.clone(),
                locs,
            });
        }
        ExprKind::Call { func, .. } if pol.secure_fns.contains(func) => out.push(Source {
            anchor: e.id,
            name: func.clone(),
            locs: Kappa::from([e.id]),
        }),
        _ => {}
    });
    out
}

/// Conditions of the branches and loops enclosing location `id`.
fn enclosing_conditions(body: &Expr, id: u32) -> Vec<u32> {
    fn go(e: &Expr, id: u32, conds: &mut Vec<u32>) -> bool {
        if e.id == id {
            return true;
        }
        let cond = match &e.kind {
            ExprKind::If(c, _, _) | ExprKind::While(c, _) => Some(c.id),
            _ => None,
        };
        for c in e.children() {
            if go(c, id, conds) {
                if let Some(k) = cond.filter(|&k| k != c.id) {
                    conds.push(k);
                }
                return true;
            }
        }
        false
    }
    let mut conds = Vec::new();
    go(body, id, &mut conds);
    conds
}

/// Violations in one function given its analysis result.
pub fn check_fn(f: &FnDef, r: &FlowResult, pol: &IfcPolicy) -> Vec<IfcViolation> {
    let Some(body) = &f.body else { return Vec::new() };
    let srcs = sources(f, r, pol);
    let mut out = Vec::new();
    body.walk(&mut |e| {
        let ExprKind::Call { func, .. } = &e.kind else { return };
        if !pol.insecure_fns.contains(func) {
            return;
        }
        let mut reach = location_deps(r, e.id);
        reach.remove(&e.id);
        let conds = enclosing_conditions(body, e.id);
        for s in &srcs {
            if reach.is_disjoint(&s.locs) {
                continue;
            }
            let mut mid: BTreeSet<u32> = reach
                .iter()
                .chain(&conds)
                .copied()
                .filter(|&l| l < r.n_locs && l != s.anchor && l != e.id)
                .filter(|&l| !location_deps(r, l).is_disjoint(&s.locs))
                .collect();
            mid.retain(|l| !s.locs.contains(l) || conds.contains(l));
            let mut chain = vec![s.anchor];
            chain.extend(mid);
            chain.push(e.id);
            out.push(IfcViolation {
                function: f.name.clone(),
                source: s.anchor,
                source_name: s.name.clone(),
                sink: e.id,
                sink_fn: func.clone(),
                chain,
            });
        }
    });
    out
}

/// Violations in every function with a body.
pub fn ifc_check(tp: &TypedProgram, mode: Mode) -> Vec<IfcViolation> {
    let pol = IfcPolicy::from_program(&tp.program);
    let mut out = Vec::new();
    for f in &tp.program.fns {
        if let Some(r) = analyze_fn(tp, &f.name, FlowConfig::new(mode)) {
            out.extend(check_fn(f, &r, &pol));
        }
    }
    out.sort();
    out
}
