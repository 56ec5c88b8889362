//! Lexer and recursive-descent parser for `.ox` source text.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at {}:{}: expected {}, found {}",
            self.line,
            self.col,
            self.expected.join(" or "),
            self.found
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
    start: usize,
    end: usize,
}

const SYMS: &[&str] = &[
    ":=", "->", "(", ")", "{", "}", "<", ">", ",", ";", ":", "&", "*", ".", "=",
];

struct Lexed {
    toks: Vec<Token>,
    /// line -> (secure, insecure) flags from `//` comments.
    notes: HashMap<u32, (bool, bool)>,
    code_lines: BTreeSet<u32>,
}

fn lex(src: &str) -> Result<Lexed, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut notes = HashMap::new();
    let mut code_lines = BTreeSet::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            let end = src[i..].find('\n').map_or(bytes.len(), |n| i + n);
            let text = &src[i..end];
            let entry = notes.entry(line).or_insert((false, false));
            entry.0 |= text.contains("@secure");
            entry.1 |= text.contains("@insecure");
            col += (end - i) as u32;
            i = end;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            Tok::Nat(src[start..i].to_string())
        } else if let Some(s) = SYMS.iter().find(|s| src[i..].starts_with(**s)) {
            i += s.len();
            Tok::Sym(s)
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                line,
                col,
                expected: vec!["token".into()],
                found: format!("`{ch}`"),
            });
        };
        code_lines.insert(line);
        toks.push(Token {
            tok,
            line,
            col,
            start,
            end: i,
        });
        col += (i - start) as u32;
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
        start: bytes.len(),
        end: bytes.len(),
    });
    Ok(Lexed {
        toks,
        notes,
        code_lines,
    })
}

const KEYWORDS: &[&str] = &[
    "fn", "extern", "let", "letprov", "if", "else", "while", "true", "false", "unit", "u32",
    "bool", "uniq", "shrd",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    notes: HashMap<u32, (bool, bool)>,
    code_lines: BTreeSet<u32>,
    abstract_provs: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

/// Parse a whole program. Locations are left unassigned.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let lexed = lex(src)?;
    let mut p = Parser {
        toks: lexed.toks,
        pos: 0,
        notes: lexed.notes,
        code_lines: lexed.code_lines,
        abstract_provs: Vec::new(),
    };
    let mut fns = Vec::new();
    while p.peek() != &Tok::Eof {
        fns.push(p.item()?);
    }
    Ok(Program { fns })
}

/// Parse and number every expression.
pub fn parse_located(src: &str) -> Result<Program, ParseError> {
    parse(src).map(assign_locations)
}

/// Parse a single expression, as if it were a function body with no abstract provenances.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let lexed = lex(src)?;
    let mut p = Parser {
        toks: lexed.toks,
        pos: 0,
        notes: lexed.notes,
        code_lines: lexed.code_lines,
        abstract_provs: Vec::new(),
    };
    let e = p.seq()?;
    p.expect_tok(&Tok::Eof, "end of input")?;
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.cur();
        Err(ParseError {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Token> {
        if self.is_sym(s) {
            Ok(self.bump())
        } else {
            self.err(&[&format!("`{s}`")])
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Token> {
        if self.is_kw(k) {
            Ok(self.bump())
        } else {
            self.err(&[&format!("`{k}`")])
        }
    }

    fn expect_tok(&mut self, t: &Tok, what: &str) -> PResult<Token> {
        if self.peek() == t {
            Ok(self.bump())
        } else {
            self.err(&[what])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err(&["identifier"]),
        }
    }

    fn nat(&mut self) -> PResult<u32> {
        match self.peek() {
            Tok::Nat(s) => match s.parse::<u32>() {
                Ok(n) => {
                    self.bump();
                    Ok(n)
                }
                Err(_) => self.err(&["32-bit natural number"]),
            },
            _ => self.err(&["natural number"]),
        }
    }

    fn span_from(&self, start: &Token) -> Span {
        let end = self.toks[self.pos.saturating_sub(1)].end.max(start.end);
        Span {
            line: start.line,
            col: start.col,
            len: (end - start.start) as u32,
        }
    }

    fn note_for(&self, line: u32) -> (bool, bool) {
        let here = self.notes.get(&line).copied().unwrap_or_default();
        let above = if line > 1 && !self.code_lines.contains(&(line - 1)) {
            self.notes.get(&(line - 1)).copied().unwrap_or_default()
        } else {
            (false, false)
        };
        (here.0 || above.0, here.1 || above.1)
    }

    fn item(&mut self) -> PResult<FnDef> {
        let start = self.cur().clone();
        let is_extern = if self.is_kw("extern") {
            self.bump();
            true
        } else {
            false
        };
        self.expect_kw("fn")?;
        let name = self.ident()?;
        let mut provs = Vec::new();
        let mut outlives = Vec::new();
        if self.eat_sym("<") {
            if !self.is_sym(">") {
                loop {
                    let p = self.ident()?;
                    if self.eat_sym(":") {
                        let q = self.ident()?;
                        outlives.push((p.clone(), q));
                    }
                    provs.push(p);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(">")?;
        }
        self.abstract_provs = provs.clone();
        self.expect_sym("(")?;
        let (param, param_ty) = if self.eat_sym(")") {
            (UNIT_PARAM.to_string(), Ty::Unit)
        } else {
            let param = self.ident()?;
            self.expect_sym(":")?;
            let param_ty = self.ty()?;
            self.expect_sym(")")?;
            (param, param_ty)
        };
        let ret_ty = if self.eat_sym("->") { self.ty()? } else { Ty::Unit };
        let body = if self.eat_sym(";") {
            None
        } else if is_extern {
            return self.err(&["`;`"]);
        } else {
            Some(self.block()?)
        };
        let (secure, insecure) = self.note_for(start.line);
        let span = self.span_from(&start);
        self.abstract_provs.clear();
        Ok(FnDef {
            name,
            provs,
            outlives,
            param,
            param_ty,
            ret_ty,
            body,
            secure,
            insecure,
            span,
        })
    }

    fn prov_ref(&self, name: String) -> Prov {
        if self.abstract_provs.contains(&name) {
            Prov::Abstract(name)
        } else {
            Prov::Concrete(name)
        }
    }

    fn ty(&mut self) -> PResult<Ty> {
        match self.peek().clone() {
            Tok::Ident(k) if k == "unit" => {
                self.bump();
                Ok(Ty::Unit)
            }
            Tok::Ident(k) if k == "u32" => {
                self.bump();
                Ok(Ty::U32)
            }
            Tok::Ident(k) if k == "bool" => {
                self.bump();
                Ok(Ty::Bool)
            }
            Tok::Sym("(") => {
                self.bump();
                let mut ts = vec![self.ty()?];
                while self.eat_sym(",") {
                    ts.push(self.ty()?);
                }
                self.expect_sym(")")?;
                if ts.len() < 2 {
                    return self.err(&["`,`"]);
                }
                Ok(Ty::Tuple(ts))
            }
            Tok::Sym("&") => {
                self.bump();
                let p = self.ident()?;
                let q = self.qual()?;
                let inner = self.ty()?;
                Ok(Ty::Ref(q, self.prov_ref(p), Box::new(inner)))
            }
            _ => self.err(&["type"]),
        }
    }

    fn qual(&mut self) -> PResult<OwnQual> {
        if self.is_kw("uniq") {
            self.bump();
            Ok(OwnQual::Uniq)
        } else if self.is_kw("shrd") {
            self.bump();
            Ok(OwnQual::Shrd)
        } else {
            self.err(&["`uniq`", "`shrd`"])
        }
    }

    fn block(&mut self) -> PResult<Expr> {
        let start = self.expect_sym("{")?;
        let mut e = self.seq()?;
        self.expect_sym("}")?;
        if matches!(e.kind, ExprKind::Seq(..)) {
            e.span = self.span_from(&start);
        }
        Ok(e)
    }

    fn seq(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        if self.is_kw("let") {
            self.bump();
            let var = self.ident()?;
            self.expect_sym(":")?;
            let ty = self.ty()?;
            self.expect_sym("=")?;
            let rhs = self.nonseq()?;
            self.expect_sym(";")?;
            let span = self.span_from(&start);
            let body = self.seq()?;
            let secure = self.note_for(start.line).0;
            return Ok(Expr::new(
                ExprKind::Let {
                    var,
                    ty,
                    rhs: Box::new(rhs),
                    body: Box::new(body),
                    secure,
                },
                span,
            ));
        }
        if self.is_kw("letprov") {
            self.bump();
            self.expect_sym("<")?;
            let mut names = vec![self.ident()?];
            while self.eat_sym(",") {
                names.push(self.ident()?);
            }
            self.expect_sym(">")?;
            let span = self.span_from(&start);
            let body = self.seq()?;
            return Ok(Expr::new(
                ExprKind::LetProv(names, Box::new(body)),
                span,
            ));
        }
        let first = self.nonseq()?;
        if self.eat_sym(";") {
            let rest = self.seq()?;
            return Ok(Expr::new(
                ExprKind::Seq(Box::new(first), Box::new(rest)),
                self.span_from(&start),
            ));
        }
        Ok(first)
    }

    fn nonseq(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        if self.is_kw("if") {
            self.bump();
            let c = self.nonseq()?;
            let span = self.span_from(&start);
            let t = self.block()?;
            self.expect_kw("else")?;
            let e = self.block()?;
            return Ok(Expr::new(
                ExprKind::If(Box::new(c), Box::new(t), Box::new(e)),
                span,
            ));
        }
        if self.is_kw("while") {
            self.bump();
            let c = self.nonseq()?;
            let span = self.span_from(&start);
            let b = self.block()?;
            return Ok(Expr::new(
                ExprKind::While(Box::new(c), Box::new(b)),
                span,
            ));
        }
        if self.is_sym("&") {
            self.bump();
            let r = self.ident()?;
            let q = self.qual()?;
            let target = self.unary()?;
            let ExprKind::PlaceUse(p) = target.kind else {
                return Err(ParseError {
                    line: target.span.line,
                    col: target.span.col,
                    expected: vec!["place expression".into()],
                    found: "expression".into(),
                });
            };
            return Ok(Expr::new(ExprKind::Borrow(q, r, p), self.span_from(&start)));
        }
        let lhs = self.unary()?;
        if self.is_sym(":=") {
            let ExprKind::PlaceUse(p) = lhs.kind else {
                return self.err(&["`;`", "`}`"]);
            };
            self.bump();
            let rhs = self.nonseq()?;
            return Ok(Expr::new(
                ExprKind::Assign(p, Box::new(rhs)),
                self.span_from(&start),
            ));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        if self.eat_sym("*") {
            let inner = self.unary()?;
            let ExprKind::PlaceUse(p) = inner.kind else {
                return Err(ParseError {
                    line: inner.span.line,
                    col: inner.span.col,
                    expected: vec!["place expression".into()],
                    found: "expression".into(),
                });
            };
            return Ok(Expr::new(
                ExprKind::PlaceUse(p.deref()),
                self.span_from(&start),
            ));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        let mut e = self.primary()?;
        while self.is_sym(".") {
            let ExprKind::PlaceUse(p) = &e.kind else {
                return self.err(&["`;`", "`}`", "`)`"]);
            };
            let p = p.clone();
            self.bump();
            let n = self.nat()? as usize;
            e = Expr::new(ExprKind::PlaceUse(p.field(n)), self.span_from(&start));
        }
        Ok(e)
    }

    fn place(&mut self) -> PResult<Place> {
        let mut p = Place::var(self.ident()?);
        while self.eat_sym(".") {
            p.fields.push(self.nat()? as usize);
        }
        Ok(p)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        match self.peek().clone() {
            Tok::Nat(_) => {
                let n = self.nat()?;
                Ok(Expr::new(ExprKind::Const(Lit::U32(n)), self.span_from(&start)))
            }
            Tok::Ident(k) if k == "true" || k == "false" => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Const(Lit::Bool(k == "true")),
                    self.span_from(&start),
                ))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Expr::new(ExprKind::Const(Lit::Unit), self.span_from(&start)));
                }
                let first = self.nonseq()?;
                if self.eat_sym(")") {
                    let mut e = first;
                    e.span = self.span_from(&start);
                    return Ok(e);
                }
                let mut es = vec![first];
                while self.eat_sym(",") {
                    es.push(self.nonseq()?);
                }
                self.expect_sym(")")?;
                Ok(Expr::new(ExprKind::Tuple(es), self.span_from(&start)))
            }
            Tok::Sym("{") => self.block(),
            Tok::Ident(_) => {
                let name = self.ident()?;
                let call_with_provs = self.is_sym("<");
                if call_with_provs || self.is_sym("(") {
                    let mut provs = Vec::new();
                    if self.eat_sym("<") {
                        if !self.is_sym(">") {
                            loop {
                                let p = self.ident()?;
                                provs.push(self.prov_ref(p));
                                if !self.eat_sym(",") {
                                    break;
                                }
                            }
                        }
                        self.expect_sym(">")?;
                    }
                    self.expect_sym("(")?;
                    let arg = if self.is_sym(")") {
                        Place::var(UNIT_PARAM)
                    } else {
                        self.place()?
                    };
                    self.expect_sym(")")?;
                    return Ok(Expr::new(
                        ExprKind::Call {
                            func: name,
                            provs,
                            arg,
                        },
                        self.span_from(&start),
                    ));
                }
                Ok(Expr::new(
                    ExprKind::PlaceUse(PlaceExpr::var(name)),
                    self.span_from(&start),
                ))
            }
            _ => self.err(&["expression"]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("fn main() { let x: u32 = 1; x }").unwrap();
        assert_eq!(p.fns.len(), 1);
        let body = p.fns[0].body.as_ref().unwrap();
        assert!(matches!(body.kind, ExprKind::Let { .. }));
    }

    #[test]
    fn tuple_then_assign() {
        let e = parse_expr("let t: (u32,u32) = (1,2); t.1 := 3").unwrap();
        let ExprKind::Let { var, ty, rhs, body, .. } = &e.kind else {
            panic!()
        };
        assert_eq!(var, "t");
        assert_eq!(*ty, Ty::Tuple(vec![Ty::U32, Ty::U32]));
        assert!(matches!(rhs.kind, ExprKind::Tuple(_)));
        let ExprKind::Assign(p, _) = &body.kind else {
            panic!()
        };
        assert_eq!(p.to_string(), "t.1");
    }

    #[test]
    fn missing_type_reports_position() {
        let err = parse_expr("let x: = 1").unwrap_err();
        assert_eq!((err.line, err.col), (1, 8));
        assert!(err.expected.contains(&"type".to_string()));
    }

    #[test]
    fn deref_and_fields() {
        let e = parse_expr("(*y).1").unwrap();
        let ExprKind::PlaceUse(p) = &e.kind else {
            panic!()
        };
        assert_eq!(p.path, vec![Seg::Deref, Seg::Field(1)]);
        let e = parse_expr("*x.0").unwrap();
        let ExprKind::PlaceUse(p) = &e.kind else {
            panic!()
        };
        assert_eq!(p.path, vec![Seg::Field(0), Seg::Deref]);
    }

    #[test]
    fn signatures_and_annotations() {
        let src = "// @insecure\nextern fn sink<a, b: a>(x: (&a uniq u32, &b shrd u32)) -> u32;\n\
                   fn main(u: unit) {\n  let s: u32 = 3; // @secure\n  s\n}\n";
        let p = parse(src).unwrap();
        let sink = &p.fns[0];
        assert!(sink.is_extern() && sink.insecure && !sink.secure);
        assert_eq!(sink.outlives, vec![("b".to_string(), "a".to_string())]);
        let Ty::Tuple(ts) = &sink.param_ty else { panic!() };
        assert!(matches!(&ts[0], Ty::Ref(OwnQual::Uniq, Prov::Abstract(a), _) if a == "a"));
        let ExprKind::Let { secure, .. } = &p.fns[1].body.as_ref().unwrap().kind else {
            panic!()
        };
        assert!(*secure);
    }

    #[test]
    fn spans_cover_source_text() {
        let src = "fn f(x: u32) -> u32 {\n  let y: u32 = x;\n  y\n}";
        let p = parse_located(src).unwrap();
        let f = &p.fns[0];
        let lets = f.expr_by_id(0).unwrap();
        assert_eq!(lets.span, Span { line: 2, col: 3, len: 15 });
        let rhs = f.expr_by_id(1).unwrap();
        assert_eq!(rhs.span, Span { line: 2, col: 16, len: 1 });
    }
}
