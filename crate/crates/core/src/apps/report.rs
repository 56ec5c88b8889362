//! JSON views of checking and flow results.

use serde_json::{json, Value};

use crate::flow::{FlowResult, Kappa};
use crate::lang::*;
use crate::ownership::check_report;

/// Per function: every location with its type, and the checking errors.
pub fn check_json(p: &Program) -> Value {
    let fns: Vec<Value> = check_report(p)
        .into_iter()
        .map(|r| {
            let def = p.func(&r.name).expect("reported function");
            let locations: Vec<Value> = def
                .locations()
                .iter()
                .map(|l| {
                    let ty = r.result.as_ref().ok().and_then(|tf| tf.fact(l.id).ty.as_ref()).map(|t| t.to_string());
                    json!({ "id": l.id, "span": l.span, "type": ty })
                })
                .collect();
            let errors: Vec<Value> = r.result.as_ref().err().map(|e| json!(e)).into_iter().collect();
            json!({ "name": r.name, "locations": locations, "errors": errors })
        })
        .collect();
    json!({ "functions": fns })
}

fn deps(f: &FnDef, r: &FlowResult, k: &Kappa) -> Vec<Value> {
    k.iter()
        .map(|&id| match r.input_of(id) {
            Some(p) => json!({ "id": id, "span": Value::Null, "input": p.to_string() }),
            None => json!({ "id": id, "span": f.expr_by_id(id).map(|e| e.span) }),
        })
        .collect()
}

/// Exit context, return dependencies and per-location dependencies of one function.
pub fn flow_json(f: &FnDef, r: &FlowResult, engine: &str) -> Value {
    let exit: Vec<Value> = r
        .exit_theta
        .map
        .iter()
        .map(|(p, k)| json!({ "place": p.to_string(), "deps": deps(f, r, k) }))
        .collect();
    let per_location: Vec<Value> = f
        .locations()
        .iter()
        .filter(|l| r.rec.kappa.contains_key(&l.id) || r.rec.theta_after.contains_key(&l.id))
        .map(|l| {
            let get = |m: &std::collections::BTreeMap<u32, Kappa>| m.get(&l.id).cloned().unwrap_or_default();
            json!({
                "id": l.id,
                "span": l.span,
                "kappa": get(&r.rec.kappa),
                "pc": get(&r.rec.pc),
            })
        })
        .collect();
    json!({
        "fn": r.fn_name,
        "mode": r.mode,
        "engine": engine,
        "exit_theta": exit,
        "ret": deps(f, r, &r.ret_kappa),
        "per_location": per_location,
    })
}
