//! Pretty-printer emitting the same grammar the parser accepts.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.fns.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&pretty_fn(f));
        out.push('\n');
    }
    out
}

pub fn pretty_fn(f: &FnDef) -> String {
    let mut out = String::new();
    if f.secure {
        out.push_str("// @secure\n");
    }
    if f.insecure {
        out.push_str("// @insecure\n");
    }
    if f.is_extern() {
        out.push_str("extern ");
    }
    write!(out, "fn {}", f.name).unwrap();
    if !f.provs.is_empty() {
        let ps: Vec<String> = f
            .provs
            .iter()
            .map(|p| match f.outlives.iter().find(|(a, _)| a == p) {
                Some((_, b)) => format!("{p}: {b}"),
                None => p.clone(),
            })
            .collect();
        write!(out, "<{}>", ps.join(", ")).unwrap();
    }
    if f.param == UNIT_PARAM && f.param_ty == Ty::Unit {
        out.push_str("()");
    } else {
        write!(out, "({}: {})", f.param, f.param_ty).unwrap();
    }
    write!(out, " -> {}", f.ret_ty).unwrap();
    match &f.body {
        None => out.push(';'),
        Some(b) => {
            out.push_str(" {\n");
            out.push_str(INDENT);
            out.push_str(&tail(b, 1));
            out.push_str("\n}");
        }
    }
    out
}

pub fn pretty_expr(e: &Expr) -> String {
    tail(e, 0)
}

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

/// Print in a position that extends to the end of the enclosing block.
fn tail(e: &Expr, depth: usize) -> String {
    match &e.kind {
        ExprKind::Let {
            var,
            ty,
            rhs,
            body,
            secure,
        } => {
            let mut s = String::new();
            if *secure {
                write!(s, "// @secure\n{}", pad(depth)).unwrap();
            }
            write!(
                s,
                "let {var}: {ty} = {};\n{}{}",
                inner(rhs, depth),
                pad(depth),
                tail(body, depth)
            )
            .unwrap();
            s
        }
        ExprKind::LetProv(names, body) => {
            format!("letprov<{}>\n{}{}", names.join(", "), pad(depth), tail(body, depth))
        }
        ExprKind::Seq(a, b) => format!("{};\n{}{}", inner(a, depth), pad(depth), tail(b, depth)),
        _ => inner(e, depth),
    }
}

fn block(e: &Expr, depth: usize) -> String {
    format!("{{\n{}{}\n{}}}", pad(depth + 1), tail(e, depth + 1), pad(depth))
}

/// Print in a position that must not swallow a following `;`.
fn inner(e: &Expr, depth: usize) -> String {
    match &e.kind {
        ExprKind::Let { .. } | ExprKind::LetProv(..) | ExprKind::Seq(..) => block(e, depth),
        ExprKind::Const(l) => l.to_string(),
        ExprKind::PlaceUse(p) => p.to_string(),
        ExprKind::Tuple(es) => {
            let parts: Vec<String> = es.iter().map(|x| inner(x, depth)).collect();
            format!("({})", parts.join(", "))
        }
        ExprKind::Assign(p, rhs) => format!("{p} := {}", inner(rhs, depth)),
        ExprKind::Borrow(q, r, p) => format!("&{r} {q} {p}"),
        ExprKind::If(c, t, f) => format!(
            "if {} {} else {}",
            inner(c, depth),
            block(t, depth),
            block(f, depth)
        ),
        ExprKind::While(c, b) => format!("while {} {}", inner(c, depth), block(b, depth)),
        ExprKind::Call { func, provs, arg } => {
            let arg = if arg.root == UNIT_PARAM && arg.fields.is_empty() {
                String::new()
            } else {
                arg.to_string()
            };
            if provs.is_empty() {
                format!("{func}({arg})")
            } else {
                let ps: Vec<&str> = provs.iter().map(Prov::name).collect();
                format!("{func}<{}>({arg})", ps.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse;

    #[test]
    fn round_trip_sample() {
        let src = "extern fn g<a>(x: &a shrd u32) -> u32;\n\
                   fn f<a, b: a>(x: (&a uniq u32, &b shrd u32)) -> unit { *x.0 := *x.1 }\n\
                   fn main(p: (u32, bool)) -> u32 {\n\
                     letprov<r> let y: u32 = { p.0 := 1; 2 };\n\
                     if p.1 { y := (*p).0 } else { while p.1 { p.1 := false } };\n\
                     g<r>(y)\n}";
        let p = parse(src).unwrap();
        let printed = pretty_program(&p);
        let q = parse(&printed).unwrap();
        assert_eq!(p.fns.len(), q.fns.len());
        for (a, b) in p.fns.iter().zip(&q.fns) {
            assert_eq!(a.body, b.body);
            assert_eq!(a.param_ty, b.param_ty);
            assert_eq!(a.outlives, b.outlives);
        }
        assert_eq!(printed, pretty_program(&q));
    }
}
