mod common;

use oxflow_core::interp::*;
use oxflow_core::lang::*;

#[derive(Default)]
struct Last {
    before: Option<Stack>,
    after: Option<Stack>,
    target: Option<Loc>,
}

impl Observer for Last {
    fn active(&self) -> bool {
        true
    }

    fn assign(&mut self, _: &str, _: &Expr, before: &Stack, after: &Stack, target: &Loc) {
        self.before = Some(before.clone());
        self.after = Some(after.clone());
        self.target = Some(target.clone());
    }
}

#[test]
fn walkthrough_writes_through_the_reborrow() {
    let tp = common::program("reborrow_chain");
    let mut obs = Last::default();
    let mut it = Interp::new(&tp.program);
    let f = tp.program.func("main").unwrap();
    let mut st = Stack::with_frame(vec![("_".into(), Value::Unit)]);
    let v = it.eval("main", &mut st, f.body.as_ref().unwrap(), &mut obs).unwrap();
    assert_eq!(v, Value::Unit);
    let x = Loc { frame: 0, var: "x".into(), fields: vec![] };
    assert_eq!(obs.target, Some(x.field(1)));
    let before = obs.before.unwrap();
    assert_eq!(before.eval_place(&PlaceExpr::var("z").deref()), Some(x.field(1)));
    assert_eq!(before.eval_place(&PlaceExpr::var("y").deref().field(1)), Some(x.field(1)));
    let after = obs.after.unwrap();
    assert_eq!(after.read(&x), Some(&Value::Tuple(vec![Value::U32(0), Value::U32(1)])));
}

#[test]
fn tuple_program_returns_updated_value() {
    let tp = common::program("tuple_field");
    let (v, _) = Interp::new(&tp.program).call_fn("main", Value::Unit, &mut NoObserver).unwrap();
    assert_eq!(v, Value::Tuple(vec![Value::U32(1), Value::U32(3)]));
}

#[test]
fn loops_respect_the_budget() {
    let src = "fn main() -> unit { let b: bool = true; while b { () } }";
    let tp = common::checked(src);
    let mut it = Interp::new(&tp.program);
    it.budget = 10_000;
    assert_eq!(it.call_fn("main", Value::Unit, &mut NoObserver).unwrap_err(), EvalError::BudgetExceeded);
}

#[test]
fn externs_are_deterministic_and_write_through_unique_refs() {
    let tp = common::program("read_until");
    let run = || {
        Interp::new(&tp.program)
            .call_fn("main", Value::Unit, &mut NoObserver)
            .unwrap()
            .0
    };
    let a = run();
    assert_eq!(a, run());
    let Value::Tuple(parts) = &a else { panic!("{a}") };
    assert_eq!(parts[1], Value::U32(5));
}
