//! Backward and forward slices over recorded per-location dependencies.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{FlowResult, Kappa};
use crate::lang::*;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// A variable, read when it leaves scope (or at function exit for the parameter).
    Var(String),
    /// A source range resolving to one expression.
    Span(Span),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "back", alias = "backward")]
    Backward,
    #[serde(rename = "fwd", alias = "forward")]
    Forward,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Direction, String> {
        match s {
            "back" | "backward" => Ok(Direction::Backward),
            "fwd" | "forward" => Ok(Direction::Forward),
            _ => Err(format!("unknown direction `{s}` (expected back or fwd)")),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Backward => "back",
            Direction::Forward => "fwd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SliceOutput {
    pub spans: Vec<Span>,
    pub locations: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unresolved criterion: {0}")]
    UnresolvedCriterion(String),
}

/// Everything a location's value or update depends on.
pub fn location_deps(r: &FlowResult, id: u32) -> Kappa {
    let mut k = Kappa::new();
    for m in [&r.rec.kappa, &r.rec.pc, &r.rec.contrib] {
        if let Some(s) = m.get(&id) {
            k.extend(s.iter().copied());
        }
    }
    k
}

/// Innermost expression whose span covers `s`.
pub fn resolve_span(f: &FnDef, src: &str, s: &Span) -> Option<u32> {
    let body = f.body.as_ref()?;
    let mut exact = None;
    body.walk(&mut |e| {
        if e.span == *s {
            exact = Some(e.id);
        }
    });
    if exact.is_some() {
        return exact;
    }
    let start = s.offset(src)?;
    let end = start + s.len as usize;
    let mut best: Option<(u32, u32)> = None;
    body.walk(&mut |e| {
        let Some(o) = e.span.offset(src) else { return };
        if o <= start && end <= o + e.span.len as usize && best.is_none_or(|(len, _)| e.span.len <= len) {
            best = Some((e.span.len, e.id));
        }
    });
    best.map(|(_, id)| id)
}

fn var_keys_deps(r: &FlowResult, f: &FnDef, x: &str) -> Result<Kappa, SliceError> {
    let th = if f.param == x {
        r.exit_theta.restrict_root(x)
    } else {
        r.rec
            .var_exit
            .get(x)
            .cloned()
            .ok_or_else(|| SliceError::UnresolvedCriterion(format!("no variable `{x}` in `{}`", f.name)))?
    };
    Ok(th.map.values().flatten().copied().collect())
}

/// Locations produced inside the right-hand sides that bind or overwrite `x`.
fn var_origins(r: &FlowResult, f: &FnDef, x: &str) -> Result<Kappa, SliceError> {
    if f.param == x {
        return Ok(r
            .inputs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.root == x)
            .map(|(i, _)| r.n_locs + i as u32)
            .collect());
    }
    let mut rhss: Vec<&Expr> = Vec::new();
    let mut bound = false;
    if let Some(b) = &f.body {
        b.walk(&mut |e| match &e.kind {
            ExprKind::Let { var, rhs, .. } if var == x => {
                bound = true;
                rhss.push(rhs);
            }
            ExprKind::Assign(p, rhs) if p.root == x => rhss.push(rhs),
            _ => {}
        });
    }
    if !bound {
        return Err(SliceError::UnresolvedCriterion(format!("no variable `{x}` in `{}`", f.name)));
    }
    let mut out = Kappa::new();
    for rhs in rhss {
        let mut inside = BTreeSet::new();
        rhs.walk(&mut |e| {
            inside.insert(e.id);
        });
        out.insert(rhs.id);
        out.extend(r.rec.kappa.get(&rhs.id).into_iter().flatten().filter(|l| inside.contains(l)));
    }
    Ok(out)
}

fn output(f: &FnDef, r: &FlowResult, ids: Kappa) -> SliceOutput {
    let ids: Vec<u32> = ids.into_iter().filter(|&l| l < r.n_locs).collect();
    let mut spans: Vec<Span> = ids.iter().filter_map(|&l| f.expr_by_id(l)).map(|e| e.span).collect();
    spans.sort();
    spans.dedup();
    SliceOutput { spans, locations: ids }
}

/// Slice of `f` at `target`, using an analysis result for `f`.
pub fn slice(f: &FnDef, src: &str, r: &FlowResult, target: &Target, dir: Direction) -> Result<SliceOutput, SliceError> {
    let at = |s: &Span| {
        resolve_span(f, src, s).ok_or_else(|| {
            SliceError::UnresolvedCriterion(format!("no expression at {}:{}+{} in `{}`", s.line, s.col, s.len, f.name))
        })
    };
    let ids = match (dir, target) {
        (Direction::Backward, Target::Var(x)) => var_keys_deps(r, f, x)?,
        (Direction::Backward, Target::Span(s)) => {
            let l = at(s)?;
            let mut k = location_deps(r, l);
            k.insert(l);
            k
        }
        (Direction::Forward, t) => {
            let seeds = match t {
                Target::Var(x) => var_origins(r, f, x)?,
                Target::Span(s) => Kappa::from([at(s)?]),
            };
            let mut out = seeds.clone();
            for l in 0..r.n_locs {
                if !location_deps(r, l).is_disjoint(&seeds) {
                    out.insert(l);
                }
            }
            out
        }
    };
    Ok(output(f, r, ids))
}
