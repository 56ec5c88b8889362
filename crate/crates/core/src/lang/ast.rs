use std::fmt;

use serde::{Deserialize, Serialize};

pub type Var = String;

/// Source position of an expression: 1-based line and column, byte length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    /// Byte offset of the span start within `src`.
    pub fn offset(&self, src: &str) -> Option<usize> {
        let mut off = 0;
        for (i, line) in src.split_inclusive('\n').enumerate() {
            if i + 1 == self.line as usize {
                return Some(off + self.col as usize - 1);
            }
            off += line.len();
        }
        None
    }

    /// Source text covered by the span.
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        self.offset(src)
            .and_then(|o| src.get(o..o + self.len as usize))
            .unwrap_or("")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Location {
    pub id: u32,
    pub fn_name: String,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Seg {
    Field(usize),
    Deref,
}

/// A variable followed by field projections and dereferences.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceExpr {
    pub root: Var,
    pub path: Vec<Seg>,
}

/// A place expression without dereferences.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Place {
    pub root: Var,
    pub fields: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OwnQual {
    Shrd,
    Uniq,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prov {
    Concrete(String),
    Abstract(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Unit,
    U32,
    Bool,
    Tuple(Vec<Ty>),
    Ref(OwnQual, Prov, Box<Ty>),
    Dead(Box<Ty>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lit {
    Unit,
    U32(u32),
    Bool(bool),
}

pub const UNASSIGNED: u32 = u32::MAX;

/// Parameter name given to functions declared with an empty parameter list.
pub const UNIT_PARAM: &str = "_";

#[derive(Clone, Debug)]
pub struct Expr {
    pub id: u32,
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Const(Lit),
    PlaceUse(PlaceExpr),
    Tuple(Vec<Expr>),
    Let {
        var: Var,
        ty: Ty,
        rhs: Box<Expr>,
        body: Box<Expr>,
        secure: bool,
    },
    Assign(PlaceExpr, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    Borrow(OwnQual, String, PlaceExpr),
    LetProv(Vec<String>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    While(Box<Expr>, Box<Expr>),
    Call {
        func: String,
        provs: Vec<Prov>,
        arg: Place,
    },
}

/// Structural equality ignores spans and ids.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FnDef {
    pub name: String,
    pub provs: Vec<String>,
    /// Pairs `(a, b)` meaning `a :> b`.
    pub outlives: Vec<(String, String)>,
    pub param: Var,
    pub param_ty: Ty,
    pub ret_ty: Ty,
    pub body: Option<Expr>,
    pub secure: bool,
    pub insecure: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub fns: Vec<FnDef>,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr {
            id: UNASSIGNED,
            span,
            kind,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Const(_)
            | ExprKind::PlaceUse(_)
            | ExprKind::Borrow(..)
            | ExprKind::Call { .. } => vec![],
            ExprKind::Tuple(es) => es.iter().collect(),
            ExprKind::Let { rhs, body, .. } => vec![rhs, body],
            ExprKind::Assign(_, e) => vec![e],
            ExprKind::Seq(a, b) | ExprKind::While(a, b) => vec![a, b],
            ExprKind::LetProv(_, b) => vec![b],
            ExprKind::If(c, t, e) => vec![c, t, e],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            ExprKind::Const(_)
            | ExprKind::PlaceUse(_)
            | ExprKind::Borrow(..)
            | ExprKind::Call { .. } => vec![],
            ExprKind::Tuple(es) => es.iter_mut().collect(),
            ExprKind::Let { rhs, body, .. } => vec![rhs, body],
            ExprKind::Assign(_, e) => vec![e],
            ExprKind::Seq(a, b) | ExprKind::While(a, b) => vec![a, b],
            ExprKind::LetProv(_, b) => vec![b],
            ExprKind::If(c, t, e) => vec![c, t, e],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Pre-order traversal with mutable access.
    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        for c in self.children_mut() {
            c.walk_mut(f);
        }
    }

    pub fn count(&self) -> u32 {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Number pre-order from `next`, returning the next free id.
    fn number(&mut self, next: u32) -> u32 {
        self.id = next;
        let mut n = next + 1;
        for c in self.children_mut() {
            n = c.number(n);
        }
        n
    }

    pub fn is_located(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |e| ok &= e.id != UNASSIGNED);
        ok
    }
}

impl FnDef {
    pub fn is_extern(&self) -> bool {
        self.body.is_none()
    }

    /// A function whose signature mentions no abstract provenances.
    pub fn is_closed(&self) -> bool {
        self.provs.is_empty()
    }

    pub fn locations(&self) -> Vec<Location> {
        let mut out = Vec::new();
        if let Some(b) = &self.body {
            b.walk(&mut |e| {
                out.push(Location {
                    id: e.id,
                    fn_name: self.name.clone(),
                    span: e.span,
                })
            });
        }
        out.sort_by_key(|l| l.id);
        out
    }

    pub fn expr_by_id(&self, id: u32) -> Option<&Expr> {
        let mut found = None;
        if let Some(b) = &self.body {
            b.walk(&mut |e| {
                if e.id == id {
                    found = Some(e)
                }
            });
        }
        found
    }

    pub fn num_locations(&self) -> u32 {
        self.body.as_ref().map_or(0, |b| b.count())
    }
}

impl Program {
    pub fn func(&self, name: &str) -> Option<&FnDef> {
        self.fns.iter().find(|f| f.name == name)
    }
}

/// Label every expression with its pre-order index within its function.
pub fn assign_locations(mut p: Program) -> Program {
    for f in &mut p.fns {
        if let Some(b) = &mut f.body {
            b.number(0);
        }
    }
    p
}

impl OwnQual {
    /// `uniq` cannot stand in where only `shrd` was granted, and vice versa holds.
    pub fn usable_as(self, granted: OwnQual) -> bool {
        !(self == OwnQual::Uniq && granted == OwnQual::Shrd)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            OwnQual::Shrd => "shrd",
            OwnQual::Uniq => "uniq",
        }
    }
}

impl Prov {
    pub fn name(&self) -> &str {
        match self {
            Prov::Concrete(n) | Prov::Abstract(n) => n,
        }
    }

    pub fn is_abstract(&self) -> bool {
        matches!(self, Prov::Abstract(_))
    }
}

impl Ty {
    pub fn is_copyable(&self) -> bool {
        match self {
            Ty::Unit | Ty::U32 | Ty::Bool => true,
            Ty::Ref(q, _, _) => *q == OwnQual::Shrd,
            Ty::Tuple(_) | Ty::Dead(_) => false,
        }
    }

    pub fn contains_dead(&self) -> bool {
        match self {
            Ty::Dead(_) => true,
            Ty::Tuple(ts) => ts.iter().any(Ty::contains_dead),
            _ => false,
        }
    }

    /// The type with every `Dead` marker removed.
    pub fn revive(&self) -> Ty {
        match self {
            Ty::Dead(t) => t.revive(),
            Ty::Tuple(ts) => Ty::Tuple(ts.iter().map(Ty::revive).collect()),
            t => t.clone(),
        }
    }

    /// Shape comparison ignoring provenances and `Dead` markers.
    pub fn same_erased(&self, other: &Ty) -> bool {
        match (self, other) {
            (Ty::Dead(a), b) => a.same_erased(b),
            (a, Ty::Dead(b)) => a.same_erased(b),
            (Ty::Unit, Ty::Unit) | (Ty::U32, Ty::U32) | (Ty::Bool, Ty::Bool) => true,
            (Ty::Tuple(a), Ty::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_erased(y))
            }
            (Ty::Ref(q1, _, a), Ty::Ref(q2, _, b)) => q1 == q2 && a.same_erased(b),
            _ => false,
        }
    }

    pub fn provs(&self, out: &mut Vec<Prov>) {
        match self {
            Ty::Ref(_, p, inner) => {
                out.push(p.clone());
                inner.provs(out);
            }
            Ty::Tuple(ts) => ts.iter().for_each(|t| t.provs(out)),
            Ty::Dead(t) => t.provs(out),
            _ => {}
        }
    }

    pub fn mentions_prov(&self, name: &str) -> bool {
        let mut ps = Vec::new();
        self.provs(&mut ps);
        ps.iter().any(|p| p.name() == name)
    }

    pub fn subst(&self, map: &dyn Fn(&Prov) -> Prov) -> Ty {
        match self {
            Ty::Ref(q, p, inner) => Ty::Ref(*q, map(p), Box::new(inner.subst(map))),
            Ty::Tuple(ts) => Ty::Tuple(ts.iter().map(|t| t.subst(map)).collect()),
            Ty::Dead(t) => Ty::Dead(Box::new(t.subst(map))),
            t => t.clone(),
        }
    }
}

impl PlaceExpr {
    pub fn var(root: impl Into<String>) -> PlaceExpr {
        PlaceExpr {
            root: root.into(),
            path: Vec::new(),
        }
    }

    pub fn field(&self, n: usize) -> PlaceExpr {
        let mut p = self.clone();
        p.path.push(Seg::Field(n));
        p
    }

    pub fn deref(&self) -> PlaceExpr {
        let mut p = self.clone();
        p.path.push(Seg::Deref);
        p
    }

    pub fn extend(&self, segs: &[Seg]) -> PlaceExpr {
        let mut p = self.clone();
        p.path.extend_from_slice(segs);
        p
    }

    pub fn has_deref(&self) -> bool {
        self.path.contains(&Seg::Deref)
    }

    pub fn as_place(&self) -> Option<Place> {
        let mut fields = Vec::new();
        for s in &self.path {
            match s {
                Seg::Field(n) => fields.push(*n),
                Seg::Deref => return None,
            }
        }
        Some(Place {
            root: self.root.clone(),
            fields,
        })
    }

    /// Split at the last dereference: `(pointer, suffix)` with `self = (*pointer).suffix`.
    pub fn split_last_deref(&self) -> Option<(PlaceExpr, Vec<Seg>)> {
        let i = self.path.iter().rposition(|s| *s == Seg::Deref)?;
        Some((
            PlaceExpr {
                root: self.root.clone(),
                path: self.path[..i].to_vec(),
            },
            self.path[i + 1..].to_vec(),
        ))
    }

    /// Every prefix that is immediately dereferenced, outermost first.
    pub fn pointer_prefixes(&self) -> Vec<PlaceExpr> {
        self.path
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Seg::Deref)
            .map(|(i, _)| PlaceExpr {
                root: self.root.clone(),
                path: self.path[..i].to_vec(),
            })
            .collect()
    }

    pub fn is_prefix_of(&self, other: &PlaceExpr) -> bool {
        self.root == other.root
            && self.path.len() <= other.path.len()
            && other.path[..self.path.len()] == self.path[..]
    }

    /// Replace the root variable by `base`.
    pub fn rebase(&self, base: &PlaceExpr) -> PlaceExpr {
        base.extend(&self.path)
    }
}

impl Place {
    pub fn var(root: impl Into<String>) -> Place {
        Place {
            root: root.into(),
            fields: Vec::new(),
        }
    }

    pub fn to_expr(&self) -> PlaceExpr {
        PlaceExpr {
            root: self.root.clone(),
            path: self.fields.iter().map(|n| Seg::Field(*n)).collect(),
        }
    }
}

impl fmt::Display for PlaceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = self.root.clone();
        let mut bare_deref = false;
        for seg in &self.path {
            match seg {
                Seg::Field(n) => {
                    if bare_deref {
                        s = format!("({s})");
                    }
                    s = format!("{s}.{n}");
                    bare_deref = false;
                }
                Seg::Deref => {
                    s = format!("*{s}");
                    bare_deref = true;
                }
            }
        }
        f.write_str(&s)
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_expr().fmt(f)
    }
}

impl fmt::Display for OwnQual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl fmt::Display for Prov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Unit => f.write_str("unit"),
            Ty::U32 => f.write_str("u32"),
            Ty::Bool => f.write_str("bool"),
            Ty::Tuple(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Ty::Ref(q, p, inner) => write!(f, "&{p} {q} {inner}"),
            Ty::Dead(t) => write!(f, "dead({t})"),
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lit::Unit => f.write_str("()"),
            Lit::U32(n) => write!(f, "{n}"),
            Lit::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for PlaceExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Serialize for Ty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
