use oxflow_core::lang::*;
use oxflow_core::ownership::*;

const WALK: &str = include_str!("../../../corpus/reborrow_chain.ox");

fn find<'a>(f: &'a TypedFn, pred: impl Fn(&ExprKind) -> bool) -> &'a Expr {
    let mut hit = None;
    f.body().unwrap().walk(&mut |e| {
        if hit.is_none() && pred(&e.kind) {
            hit = Some(e);
        }
    });
    hit.unwrap()
}

fn loans(ls: &LoanSet) -> Vec<String> {
    ls.iter().map(|l| l.to_string()).collect()
}

#[test]
fn walkthrough_loan_sets() {
    let tp = typecheck(&parse_located(WALK).unwrap()).unwrap();
    let f = tp.func("main").unwrap();
    let b1 = find(f, |k| matches!(k, ExprKind::Borrow(_, r, _) if r == "r1"));
    assert_eq!(loans(f.fact(b1.id).loans.as_ref().unwrap()), vec!["uniq x"]);
    let b3 = find(f, |k| matches!(k, ExprKind::Borrow(_, r, _) if r == "r3"));
    let env = f.fact(b3.id).env_before.as_ref().unwrap();
    assert_eq!(loans(&env.provs["r2"]), vec!["uniq x"]);
    assert_eq!(loans(f.fact(b3.id).loans.as_ref().unwrap()), vec!["uniq x.1", "uniq (*y).1"]);
    let asg = find(f, |k| matches!(k, ExprKind::Assign(..)));
    let env = f.fact(asg.id).query_env.as_ref().unwrap();
    assert_eq!(env.provs["r4"], env.provs["r3"]);
    assert_eq!(
        loans(f.fact(asg.id).loans.as_ref().unwrap()),
        vec!["uniq x.1", "uniq (*y).1", "uniq *z"]
    );
    let direct = env.ownership_safe(OwnQual::Uniq, &PlaceExpr::var("z").deref()).unwrap();
    assert_eq!(&direct, f.fact(asg.id).loans.as_ref().unwrap());
}

#[test]
fn walkthrough_direct_write_rejected() {
    let src = WALK.replace("*z := 1", "x.1 := 1");
    let errs = typecheck(&parse_located(&src).unwrap()).unwrap_err();
    assert_eq!(errs[0].1.kind, ErrorKind::OwnershipViolation);
}

#[test]
fn outlives_chain_propagates() {
    let mut env = TypeEnv::default();
    for r in ["r1", "r2", "r3"] {
        env.provs.insert(r.into(), LoanSet::new());
    }
    env.provs.get_mut("r1").unwrap().insert(Loan::new(OwnQual::Uniq, PlaceExpr::var("x")));
    let c = |n: &str| Prov::Concrete(n.into());
    env.add_outlives(&c("r2"), &c("r3")).unwrap();
    env.add_outlives(&c("r1"), &c("r2")).unwrap();
    assert!(env.provs["r3"].contains(&Loan::new(OwnQual::Uniq, PlaceExpr::var("x"))));
    let before = env.clone();
    env.add_outlives(&c("r1"), &c("r1")).unwrap();
    assert_eq!(env, before);
    assert_eq!(
        env.add_outlives(&c("r1"), &c("nope")).unwrap_err().kind,
        ErrorKind::UnknownProvenance
    );
}
