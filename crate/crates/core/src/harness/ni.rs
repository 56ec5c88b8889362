//! Randomized noninterference checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gen::{agree_on, gen_stack};
use crate::flow::policy::{coarse_init, fine_init, scope_keys};
use crate::flow::{analyze_from, FlowConfig, Kappa, Mode, Theta};
use crate::interp::{EvalError, Interp, NoObserver, Stack, Value};
use crate::lang::places::{conflicts, type_at};
use crate::lang::*;
use crate::ownership::{TypeEnv, TypedProgram};

const AGREE_RETRIES: usize = 20;
const MAX_EXAMPLES: usize = 5;

/// A subexpression of a closed function evaluated on random stacks.
#[derive(Clone, Debug)]
pub struct Target {
    pub fn_name: String,
    pub expr_id: u32,
    pub env: TypeEnv,
    pub keys: Vec<PlaceExpr>,
    pub base: u32,
    /// Places the expression moves out of; keys overlapping them are not compared afterwards.
    pub moved: Vec<PlaceExpr>,
}

/// Function bodies, let bodies, sequence parts, branches and loop bodies of closed functions.
pub fn targets(tp: &TypedProgram) -> Vec<Target> {
    let mut out = Vec::new();
    for (name, f) in &tp.fns {
        let Some(body) = f.body() else { continue };
        if !f.def.is_closed() {
            continue;
        }
        let mut ids = vec![body.id];
        body.walk(&mut |e| match &e.kind {
            ExprKind::Let { body, .. } | ExprKind::LetProv(_, body) => ids.push(body.id),
            ExprKind::Seq(a, b) => ids.extend([a.id, b.id]),
            ExprKind::If(_, t, el) => ids.extend([t.id, el.id]),
            ExprKind::While(_, b) => ids.push(b.id),
            _ => {}
        });
        ids.sort();
        ids.dedup();
        for id in ids {
            let Some(env) = f.fact(id).env_before.clone() else { continue };
            let keys = scope_keys(&env.vars);
            let mut moved: Vec<PlaceExpr> = keys
                .iter()
                .filter(|k| {
                    let t = env.vars.iter().rev().find(|(v, _)| *v == k.root).map(|(_, t)| t);
                    t.and_then(|t| type_at(t, &k.path)).is_none_or(|t| t.contains_dead())
                })
                .cloned()
                .collect();
            f.def.expr_by_id(id).expect("expression").walk(&mut |e| {
                if !f.fact(e.id).moved {
                    return;
                }
                match &e.kind {
                    ExprKind::PlaceUse(p) => moved.push(p.clone()),
                    ExprKind::Call { arg, .. } => moved.push(arg.to_expr()),
                    _ => {}
                }
            });
            out.push(Target {
                fn_name: name.clone(),
                expr_id: id,
                env,
                keys,
                base: f.def.num_locations(),
                moved,
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Fine,
    Coarse,
}

struct Prepared<'a> {
    target: &'a Target,
    expr: &'a Expr,
    init: Init,
    theta0: Theta,
    kappa: Kappa,
    theta_out: Theta,
}

#[derive(Clone, Debug, Serialize)]
pub struct NiViolation {
    pub fn_name: String,
    pub expr: u32,
    pub init: Init,
    /// `a` for the result value, `b` for a post-state place.
    pub part: char,
    pub place: Option<String>,
    pub left: String,
    pub right: String,
    pub sigma1: Stack,
    pub sigma2: Stack,
}

#[derive(Clone, Debug, Serialize)]
pub struct NiReport {
    pub program: String,
    pub mode: Mode,
    pub trials: usize,
    pub part_a_checks: usize,
    pub part_b_checks: usize,
    pub skipped: usize,
    pub violation_count: usize,
    pub violations: Vec<NiViolation>,
}

impl NiReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

fn run(tp: &TypedProgram, fn_name: &str, e: &Expr, st: &mut Stack) -> Result<Value, EvalError> {
    let mut it = Interp::new(&tp.program);
    it.budget = super::TRIAL_BUDGET;
    it.eval(fn_name, st, e, &mut NoObserver)
}

fn show(v: Option<&Value>) -> String {
    v.map_or_else(|| "<none>".to_string(), |v| v.to_string())
}

/// Check both parts of noninterference on `trials` random stacks.
pub fn check_noninterference(name: &str, tp: &TypedProgram, cfg: FlowConfig, trials: usize, seed: u64) -> NiReport {
    let ts = targets(tp);
    let mut prepared = Vec::new();
    for t in &ts {
        let f = tp.func(&t.fn_name).expect("function");
        let expr = f.def.expr_by_id(t.expr_id).expect("expression");
        for init in [Init::Fine, Init::Coarse] {
            let theta0 = match init {
                Init::Fine => fine_init(&t.keys, t.base),
                Init::Coarse => coarse_init(&t.keys, t.base),
            };
            let mut th = theta0.clone();
            let (kappa, _) = analyze_from(tp, &t.fn_name, expr, &mut th, cfg);
            prepared.push(Prepared {
                target: t,
                expr,
                init,
                theta0,
                kappa,
                theta_out: th,
            });
        }
    }
    let mut rep = NiReport {
        program: name.to_string(),
        mode: cfg.mode,
        trials: 0,
        part_a_checks: 0,
        part_b_checks: 0,
        skipped: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    if prepared.is_empty() {
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..trials {
        let p = &prepared[i % prepared.len()];
        rep.trials += 1;
        if trial(tp, p, &mut rng, &mut rep).is_err() {
            rep.skipped += 1;
        }
    }
    rep
}

fn partner(p: &Prepared, s1: &Stack, agree: &[PlaceExpr], rng: &mut impl Rng) -> Stack {
    for _ in 0..AGREE_RETRIES {
        if let Some(fresh) = gen_stack(&p.target.env, rng) {
            if let Some(s2) = agree_on(s1, fresh, agree) {
                return s2;
            }
        }
    }
    s1.clone()
}

fn trial(tp: &TypedProgram, p: &Prepared, rng: &mut impl Rng, rep: &mut NiReport) -> Result<(), EvalError> {
    let fname = &p.target.fn_name;
    let Some(s1) = gen_stack(&p.target.env, rng) else {
        return Err(EvalError::DanglingDeref("initial stack".into()));
    };
    let mut post1 = s1.clone();
    let v1 = run(tp, fname, p.expr, &mut post1)?;

    let agree: Vec<PlaceExpr> = p.theta0.deps(&p.kappa).into_iter().collect();
    let s2 = partner(p, &s1, &agree, rng);
    let mut post2 = s2.clone();
    let v2 = run(tp, fname, p.expr, &mut post2)?;
    rep.part_a_checks += 1;
    if v1 != v2 {
        record(rep, p, 'a', None, v1.to_string(), v2.to_string(), &s1, &s2);
    }

    for (key, k) in &p.theta_out.map {
        if p.target.moved.iter().any(|m| conflicts(m, key)) {
            continue;
        }
        let agree: Vec<PlaceExpr> = p.theta0.deps(k).into_iter().collect();
        let s2 = partner(p, &s1, &agree, rng);
        let mut post2 = s2.clone();
        run(tp, fname, p.expr, &mut post2)?;
        rep.part_b_checks += 1;
        let (a, b) = (post1.get(key), post2.get(key));
        if a != b {
            record(rep, p, 'b', Some(key), show(a), show(b), &s1, &s2);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record(
    rep: &mut NiReport,
    p: &Prepared,
    part: char,
    key: Option<&PlaceExpr>,
    left: String,
    right: String,
    s1: &Stack,
    s2: &Stack,
) {
    rep.violation_count += 1;
    if rep.violations.len() < MAX_EXAMPLES {
        rep.violations.push(NiViolation {
            fn_name: p.target.fn_name.clone(),
            expr: p.target.expr_id,
            init: p.init,
            part,
            place: key.map(|k| k.to_string()),
            left,
            right,
            sigma1: s1.clone(),
            sigma2: s2.clone(),
        });
    }
}
