//! Lowering of typed function bodies into basic blocks over temporaries.

use std::fmt;

use crate::lang::*;
use crate::ownership::TypedFn;

pub type Temp = u32;
pub type BlockId = usize;

pub fn temp_place(t: Temp) -> PlaceExpr {
    PlaceExpr::var(format!("%t{t}"))
}

pub fn is_temp(p: &PlaceExpr) -> bool {
    p.root.starts_with('%')
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rvalue {
    Const,
    Empty,
    Use { place: PlaceExpr, moved: bool },
    Temp(Temp),
    TupleAgg(Vec<Temp>),
    Ref(PlaceExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    /// `dest := rv` for a fresh temporary.
    Def { loc: u32, dest: Temp, rv: Rvalue },
    /// Binding of a local variable.
    Bind { loc: u32, var: Var, ty: Ty, src: Temp },
    /// Assignment to a program place.
    Write { loc: u32, place: PlaceExpr, src: Temp },
    Call { loc: u32, dest: Temp, func: String, arg: PlaceExpr, param_ty: Ty },
    StorageDead { loc: u32, var: Var },
}

impl Stmt {
    pub fn loc(&self) -> u32 {
        match self {
            Stmt::Def { loc, .. }
            | Stmt::Bind { loc, .. }
            | Stmt::Write { loc, .. }
            | Stmt::Call { loc, .. }
            | Stmt::StorageDead { loc, .. } => *loc,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Goto(BlockId),
    Switch { loc: u32, cond: Temp, then: BlockId, other: BlockId },
    Return(Temp),
}

impl Term {
    pub fn succs(&self) -> Vec<BlockId> {
        match self {
            Term::Goto(b) => vec![*b],
            Term::Switch { then, other, .. } => vec![*then, *other],
            Term::Return(_) => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub term: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub fn_name: String,
    pub param: Var,
    pub param_ty: Ty,
    pub blocks: Vec<Block>,
    pub n_temps: u32,
}

impl Body {
    pub fn exit(&self) -> BlockId {
        self.blocks
            .iter()
            .position(|b| matches!(b.term, Term::Return(_)))
            .expect("return block")
    }

    pub fn preds(&self) -> Vec<Vec<BlockId>> {
        let mut out = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for s in b.term.succs() {
                out[s].push(i);
            }
        }
        out
    }
}

struct Lowerer<'a> {
    f: &'a TypedFn,
    blocks: Vec<Block>,
    cur: BlockId,
    next_temp: Temp,
}

/// Lower a function with a body; `None` for externs.
pub fn lower(f: &TypedFn) -> Option<Body> {
    let body = f.body()?;
    let mut l = Lowerer {
        f,
        blocks: vec![Block {
            stmts: Vec::new(),
            term: Term::Goto(usize::MAX),
        }],
        cur: 0,
        next_temp: 0,
    };
    let t = l.expr(body);
    l.blocks[l.cur].term = Term::Return(t);
    Some(Body {
        fn_name: f.def.name.clone(),
        param: f.def.param.clone(),
        param_ty: f.def.param_ty.clone(),
        blocks: l.blocks,
        n_temps: l.next_temp,
    })
}

impl Lowerer<'_> {
    fn temp(&mut self) -> Temp {
        self.next_temp += 1;
        self.next_temp - 1
    }

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(Block {
            stmts: Vec::new(),
            term: Term::Goto(usize::MAX),
        });
        self.blocks.len() - 1
    }

    fn push(&mut self, s: Stmt) {
        self.blocks[self.cur].stmts.push(s);
    }

    fn def(&mut self, loc: u32, rv: Rvalue) -> Temp {
        let dest = self.temp();
        self.push(Stmt::Def { loc, dest, rv });
        dest
    }

    fn expr(&mut self, e: &Expr) -> Temp {
        match &e.kind {
            ExprKind::Const(_) => self.def(e.id, Rvalue::Const),
            ExprKind::PlaceUse(p) => {
                let moved = self.f.fact(e.id).moved;
                self.def(e.id, Rvalue::Use { place: p.clone(), moved })
            }
            ExprKind::Tuple(es) => {
                let ts: Vec<Temp> = es.iter().map(|x| self.expr(x)).collect();
                self.def(e.id, Rvalue::TupleAgg(ts))
            }
            ExprKind::Let { var, ty, rhs, body, .. } => {
                let src = self.expr(rhs);
                self.push(Stmt::Bind {
                    loc: e.id,
                    var: var.clone(),
                    ty: ty.clone(),
                    src,
                });
                let t = self.expr(body);
                self.push(Stmt::StorageDead { loc: e.id, var: var.clone() });
                t
            }
            ExprKind::Assign(p, rhs) => {
                let src = self.expr(rhs);
                self.push(Stmt::Write {
                    loc: e.id,
                    place: p.clone(),
                    src,
                });
                self.def(e.id, Rvalue::Empty)
            }
            ExprKind::Seq(a, b) => {
                self.expr(a);
                self.expr(b)
            }
            ExprKind::Borrow(_, _, p) => self.def(e.id, Rvalue::Ref(p.clone())),
            ExprKind::LetProv(_, body) => self.expr(body),
            ExprKind::If(c, t, el) => {
                let cond = self.expr(c);
                let bt = self.new_block();
                let be = self.new_block();
                let join = self.new_block();
                self.blocks[self.cur].term = Term::Switch {
                    loc: e.id,
                    cond,
                    then: bt,
                    other: be,
                };
                let r = self.temp();
                for (b, arm) in [(bt, t), (be, el)] {
                    self.cur = b;
                    let v = self.expr(arm);
                    self.push(Stmt::Def {
                        loc: e.id,
                        dest: r,
                        rv: Rvalue::Temp(v),
                    });
                    self.blocks[self.cur].term = Term::Goto(join);
                }
                self.cur = join;
                r
            }
            ExprKind::While(c, body) => {
                let head = self.new_block();
                self.blocks[self.cur].term = Term::Goto(head);
                self.cur = head;
                let cond = self.expr(c);
                let bb = self.new_block();
                let exit = self.new_block();
                self.blocks[self.cur].term = Term::Switch {
                    loc: e.id,
                    cond,
                    then: bb,
                    other: exit,
                };
                self.cur = bb;
                self.expr(body);
                self.blocks[self.cur].term = Term::Goto(head);
                self.cur = exit;
                self.def(e.id, Rvalue::Empty)
            }
            ExprKind::Call { func, arg, .. } => {
                let dest = self.temp();
                let param_ty = self.f.fact(e.id).call.as_ref().expect("call fact").param_ty.clone();
                self.push(Stmt::Call {
                    loc: e.id,
                    dest,
                    func: func.clone(),
                    arg: arg.to_expr(),
                    param_ty,
                });
                dest
            }
        }
    }
}

impl fmt::Display for Rvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rvalue::Const => f.write_str("const"),
            Rvalue::Empty => f.write_str("()"),
            Rvalue::Use { place, moved } => write!(f, "{}{place}", if *moved { "move " } else { "" }),
            Rvalue::Temp(t) => write!(f, "%t{t}"),
            Rvalue::TupleAgg(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| format!("%t{t}")).collect();
                write!(f, "({})", parts.join(", "))
            }
            Rvalue::Ref(p) => write!(f, "&{p}"),
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Def { loc, dest, rv } => write!(f, "[{loc}] %t{dest} = {rv}"),
            Stmt::Bind { loc, var, src, .. } => write!(f, "[{loc}] let {var} = %t{src}"),
            Stmt::Write { loc, place, src } => write!(f, "[{loc}] {place} := %t{src}"),
            Stmt::Call { loc, dest, func, arg, .. } => write!(f, "[{loc}] %t{dest} = {func}({arg})"),
            Stmt::StorageDead { loc, var } => write!(f, "[{loc}] dead {var}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Goto(b) => write!(f, "goto bb{b}"),
            Term::Switch { loc, cond, .. } => write!(f, "[{loc}] switch %t{cond}"),
            Term::Return(t) => write!(f, "return %t{t}"),
        }
    }
}
