use std::collections::BTreeSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use thiserror::Error;

use super::value::{Loc, Stack, Value};
use crate::lang::*;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("step budget exhausted")]
    BudgetExceeded,
    #[error("dangling or ill-typed place `{0}`")]
    DanglingDeref(String),
    #[error("condition is not a boolean")]
    NotBool,
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("extern `{0}` returns a reference")]
    UnsupportedExtern(String),
}

/// Hooks called around effects during evaluation.
pub trait Observer {
    /// Whether the hooks need stack snapshots.
    fn active(&self) -> bool {
        false
    }
    fn assign(&mut self, _fn_name: &str, _e: &Expr, _before: &Stack, _after: &Stack, _target: &Loc) {}
    fn call(&mut self, _fn_name: &str, _e: &Expr, _before: &Stack, _after: &Stack, _result: &Value) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

pub struct Interp<'a> {
    pub prog: &'a Program,
    pub budget: u64,
    pub steps: u64,
    fns: Vec<String>,
}

impl<'a> Interp<'a> {
    pub fn new(prog: &'a Program) -> Interp<'a> {
        Interp {
            prog,
            budget: DEFAULT_BUDGET,
            steps: 0,
            fns: Vec::new(),
        }
    }

    /// Evaluate `e`, the code of `fn_name`, in the active frame of `st`.
    pub fn eval(&mut self, fn_name: &str, st: &mut Stack, e: &Expr, obs: &mut dyn Observer) -> Result<Value, EvalError> {
        self.fns.push(fn_name.to_string());
        let r = self.expr(st, e, obs);
        self.fns.pop();
        r
    }

    /// Call `f` on an argument value from a fresh stack.
    pub fn call_fn(&mut self, f: &str, arg: Value, obs: &mut dyn Observer) -> Result<(Value, Stack), EvalError> {
        let def = self.prog.func(f).ok_or_else(|| EvalError::UnknownFunction(f.to_string()))?;
        let mut st = Stack::with_frame(vec![(def.param.clone(), arg)]);
        let v = match &def.body {
            Some(b) => self.eval(f, &mut st, b, obs)?,
            None => {
                let l = Loc {
                    frame: 0,
                    var: def.param.clone(),
                    fields: vec![],
                };
                havoc(def, &mut st, Some(&l))?
            }
        };
        Ok((v, st))
    }

    fn place(&self, st: &Stack, p: &PlaceExpr) -> Result<Loc, EvalError> {
        st.eval_place(p).ok_or_else(|| EvalError::DanglingDeref(p.to_string()))
    }

    fn expr(&mut self, st: &mut Stack, e: &Expr, obs: &mut dyn Observer) -> Result<Value, EvalError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(EvalError::BudgetExceeded);
        }
        match &e.kind {
            ExprKind::Const(l) => Ok(match l {
                Lit::Unit => Value::Unit,
                Lit::U32(n) => Value::U32(*n),
                Lit::Bool(b) => Value::Bool(*b),
            }),
            ExprKind::PlaceUse(p) => {
                let l = self.place(st, p)?;
                Ok(st.read(&l).cloned().expect("resolved place"))
            }
            ExprKind::Tuple(es) => {
                let mut vs = Vec::with_capacity(es.len());
                for x in es {
                    vs.push(self.expr(st, x, obs)?);
                }
                Ok(Value::Tuple(vs))
            }
            ExprKind::Let { var, rhs, body, .. } => {
                let v = self.expr(st, rhs, obs)?;
                let top = st.top();
                st.frames[top].vars.push((var.clone(), v));
                let r = self.expr(st, body, obs);
                st.frames[top].vars.pop();
                r
            }
            ExprKind::Assign(p, rhs) => {
                let v = self.expr(st, rhs, obs)?;
                let l = self.place(st, p)?;
                if obs.active() {
                    let before = st.clone();
                    st.write(&l, v);
                    let f = self.fns.last().cloned().unwrap_or_default();
                    obs.assign(&f, e, &before, st, &l);
                } else {
                    st.write(&l, v);
                }
                Ok(Value::Unit)
            }
            ExprKind::Seq(a, b) => {
                self.expr(st, a, obs)?;
                self.expr(st, b, obs)
            }
            ExprKind::Borrow(_, _, p) => Ok(Value::Ptr(self.place(st, p)?)),
            ExprKind::LetProv(_, body) => self.expr(st, body, obs),
            ExprKind::If(c, t, f) => match self.expr(st, c, obs)? {
                Value::Bool(true) => self.expr(st, t, obs),
                Value::Bool(false) => self.expr(st, f, obs),
                _ => Err(EvalError::NotBool),
            },
            ExprKind::While(c, body) => loop {
                match self.expr(st, c, obs)? {
                    Value::Bool(true) => {
                        self.expr(st, body, obs)?;
                    }
                    Value::Bool(false) => return Ok(Value::Unit),
                    _ => return Err(EvalError::NotBool),
                }
            },
            ExprKind::Call { func, arg, .. } => {
                let before = obs.active().then(|| st.clone());
                let v = self.call(st, func, arg, obs)?;
                if let Some(before) = before {
                    let f = self.fns.last().cloned().unwrap_or_default();
                    obs.call(&f, e, &before, st, &v);
                }
                Ok(v)
            }
        }
    }

    fn call(&mut self, st: &mut Stack, func: &str, arg: &Place, obs: &mut dyn Observer) -> Result<Value, EvalError> {
        let def = self.prog.func(func).ok_or_else(|| EvalError::UnknownFunction(func.to_string()))?;
        let arg_loc = if arg.root == UNIT_PARAM && arg.fields.is_empty() && !st.has_var(UNIT_PARAM) {
            None
        } else {
            Some(self.place(st, &arg.to_expr())?)
        };
        let v = match &arg_loc {
            Some(l) => st.read(l).cloned().expect("resolved place"),
            None => Value::Unit,
        };
        match &def.body {
            Some(body) => {
                st.frames.push(super::value::Frame {
                    vars: vec![(def.param.clone(), v)],
                });
                self.fns.push(func.to_string());
                let r = self.expr(st, body, obs);
                self.fns.pop();
                st.frames.pop();
                r
            }
            None => {
                st.frames.push(super::value::Frame {
                    vars: vec![(def.param.clone(), v)],
                });
                let l = Loc {
                    frame: st.top(),
                    var: def.param.clone(),
                    fields: vec![],
                };
                let r = havoc(def, st, Some(&l));
                st.frames.pop();
                r
            }
        }
    }
}

/// Extern behaviour: a deterministic function of everything readable from the argument,
/// written to every place reachable through unique references and returned.
fn havoc(def: &FnDef, st: &mut Stack, arg: Option<&Loc>) -> Result<Value, EvalError> {
    let mut h = DefaultHasher::new();
    def.name.hash(&mut h);
    let mut writable = Vec::new();
    if let Some(l) = arg {
        let mut seen = BTreeSet::new();
        walk(st, l, &def.param_ty, true, &mut seen, &mut h, &mut writable);
    }
    let seed = h.finish();
    for (i, (l, ty)) in writable.iter().enumerate() {
        let v = derive(seed, i as u64 + 1, ty);
        st.write(l, v);
    }
    let mut ps = Vec::new();
    def.ret_ty.provs(&mut ps);
    if !ps.is_empty() {
        return Err(EvalError::UnsupportedExtern(def.name.clone()));
    }
    Ok(derive(seed, 0, &def.ret_ty))
}

fn walk(
    st: &Stack,
    l: &Loc,
    ty: &Ty,
    writable: bool,
    seen: &mut BTreeSet<(Loc, bool)>,
    h: &mut DefaultHasher,
    out: &mut Vec<(Loc, Ty)>,
) {
    if !seen.insert((l.clone(), writable)) {
        return;
    }
    let Some(v) = st.read(l) else {
        return;
    };
    match (v, ty) {
        (_, Ty::Dead(t)) => walk(st, l, t, writable, seen, h, out),
        (Value::Tuple(vs), Ty::Tuple(ts)) => {
            for i in 0..vs.len().min(ts.len()) {
                walk(st, &l.field(i), &ts[i], writable, seen, h, out);
            }
        }
        (Value::Ptr(t), Ty::Ref(q, _, inner)) => {
            let t = t.clone();
            walk(st, &t, inner, writable && *q == OwnQual::Uniq, seen, h, out);
        }
        (Value::U32(n), _) => {
            n.hash(h);
            if writable && l.frame + 1 != st.frames.len() {
                out.push((l.clone(), Ty::U32));
            }
        }
        (Value::Bool(b), _) => {
            b.hash(h);
            if writable && l.frame + 1 != st.frames.len() {
                out.push((l.clone(), Ty::Bool));
            }
        }
        _ => {}
    }
}

fn derive(seed: u64, salt: u64, ty: &Ty) -> Value {
    let mut h = DefaultHasher::new();
    (seed, salt).hash(&mut h);
    let x = h.finish();
    match ty {
        Ty::Unit => Value::Unit,
        Ty::U32 => Value::U32((x % (1 << 16)) as u32),
        Ty::Bool => Value::Bool(x & 1 == 1),
        Ty::Tuple(ts) => Value::Tuple(
            ts.iter()
                .enumerate()
                .map(|(i, t)| derive(x, i as u64, t))
                .collect(),
        ),
        Ty::Dead(t) => derive(seed, salt, t),
        Ty::Ref(..) => Value::Unit,
    }
}
