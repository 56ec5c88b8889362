//! Random well-typed stacks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::interp::{Stack, Value};
use crate::lang::*;
use crate::ownership::TypeEnv;

/// A stack with one frame holding every variable of `env`, each reference aimed at one
/// of the loans of its provenance.
pub fn gen_stack(env: &TypeEnv, rng: &mut impl Rng) -> Option<Stack> {
    let mut st = Stack::with_frame(Vec::new());
    for (v, t) in &env.vars {
        let val = gen_value(t, env, &st, rng)?;
        st.frames[0].vars.push((v.clone(), val));
    }
    Some(st)
}

pub fn gen_value(ty: &Ty, env: &TypeEnv, st: &Stack, rng: &mut impl Rng) -> Option<Value> {
    Some(match ty {
        Ty::Unit => Value::Unit,
        Ty::U32 => Value::U32(rng.gen_range(0..1 << 16)),
        Ty::Bool => Value::Bool(rng.gen()),
        Ty::Tuple(ts) => {
            let mut vs = Vec::with_capacity(ts.len());
            for t in ts {
                vs.push(gen_value(t, env, st, rng)?);
            }
            Value::Tuple(vs)
        }
        Ty::Ref(_, rho, _) => {
            let mut targets: Vec<PlaceExpr> = env.loans_of(rho).into_iter().map(|l| l.place).collect();
            targets.shuffle(rng);
            let l = targets.iter().find_map(|p| st.eval_place(p))?;
            Value::Ptr(l)
        }
        Ty::Dead(t) => gen_value(t, env, st, rng).unwrap_or_else(|| placeholder(t)),
    })
}

fn placeholder(t: &Ty) -> Value {
    match t {
        Ty::Tuple(ts) => Value::Tuple(ts.iter().map(placeholder).collect()),
        Ty::U32 => Value::U32(0),
        Ty::Bool => Value::Bool(false),
        Ty::Dead(t) => placeholder(t),
        _ => Value::Unit,
    }
}

/// Overwrite `s2` so it agrees with `s1` on every place in `agree`; `None` when the
/// pointers of `s2` make that impossible.
pub fn agree_on<'a>(s1: &Stack, mut s2: Stack, agree: impl IntoIterator<Item = &'a PlaceExpr>) -> Option<Stack> {
    let mut ps: Vec<&PlaceExpr> = agree.into_iter().collect();
    ps.sort_by_key(|p| (p.path.iter().filter(|s| **s == Seg::Deref).count(), p.path.len()));
    for p in &ps {
        let v = s1.get(p)?.clone();
        let l = s2.eval_place(p)?;
        s2.write(&l, v);
    }
    ps.iter().all(|p| s1.get(p) == s2.get(p)).then_some(s2)
}
