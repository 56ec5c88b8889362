use std::fmt;

use serde::Serialize;

use crate::lang::*;

/// A concrete stack location: frame index, variable and field path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Loc {
    pub frame: usize,
    pub var: Var,
    pub fields: Vec<usize>,
}

impl Loc {
    pub fn field(&self, n: usize) -> Loc {
        let mut l = self.clone();
        l.fields.push(n);
        l
    }

    /// Same variable and one field path a prefix of the other.
    pub fn conflicts(&self, other: &Loc) -> bool {
        let n = self.fields.len().min(other.fields.len());
        self.frame == other.frame && self.var == other.var && self.fields[..n] == other.fields[..n]
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.var, self.frame)?;
        for n in &self.fields {
            write!(f, ".{n}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Unit,
    U32(u32),
    Bool(bool),
    Tuple(Vec<Value>),
    Ptr(Loc),
}

impl Value {
    pub fn at(&self, fields: &[usize]) -> Option<&Value> {
        let mut v = self;
        for &n in fields {
            match v {
                Value::Tuple(vs) => v = vs.get(n)?,
                _ => return None,
            }
        }
        Some(v)
    }

    pub fn at_mut(&mut self, fields: &[usize]) -> Option<&mut Value> {
        let mut v = self;
        for &n in fields {
            match v {
                Value::Tuple(vs) => v = vs.get_mut(n)?,
                _ => return None,
            }
        }
        Some(v)
    }

    /// Every leaf with its field path.
    pub fn leaves(&self, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Value)>) {
        match self {
            Value::Tuple(vs) => {
                for (i, v) in vs.iter().enumerate() {
                    path.push(i);
                    v.leaves(path, out);
                    path.pop();
                }
            }
            v => out.push((path.clone(), v.clone())),
        }
    }

    pub fn has_type(&self, ty: &Ty) -> bool {
        match (self, ty) {
            (v, Ty::Dead(t)) => v.has_type(t),
            (Value::Unit, Ty::Unit) | (Value::U32(_), Ty::U32) | (Value::Bool(_), Ty::Bool) => true,
            (Value::Tuple(vs), Ty::Tuple(ts)) => vs.len() == ts.len() && vs.iter().zip(ts).all(|(v, t)| v.has_type(t)),
            (Value::Ptr(_), Ty::Ref(..)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("()"),
            Value::U32(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Tuple(vs) => {
                f.write_str("(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Value::Ptr(l) => write!(f, "ptr {l}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Value::Unit => s.serialize_unit(),
            Value::U32(n) => s.serialize_u32(*n),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Tuple(vs) => vs.serialize(s),
            Value::Ptr(l) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("ptr", &l.to_string())?;
                m.end()
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub vars: Vec<(Var, Value)>,
}

/// Frames of variable bindings; the last frame is the active one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stack {
    pub frames: Vec<Frame>,
}

impl Stack {
    pub fn with_frame(vars: Vec<(Var, Value)>) -> Stack {
        Stack {
            frames: vec![Frame { vars }],
        }
    }

    pub fn top(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn has_var(&self, var: &str) -> bool {
        self.frames.last().is_some_and(|f| f.vars.iter().any(|(v, _)| v == var))
    }

    pub fn var(&self, frame: usize, var: &str) -> Option<&Value> {
        self.frames.get(frame)?.vars.iter().rev().find(|(v, _)| v == var).map(|(_, x)| x)
    }

    fn var_mut(&mut self, frame: usize, var: &str) -> Option<&mut Value> {
        self.frames.get_mut(frame)?.vars.iter_mut().rev().find(|(v, _)| v == var).map(|(_, x)| x)
    }

    pub fn read(&self, l: &Loc) -> Option<&Value> {
        self.var(l.frame, &l.var)?.at(&l.fields)
    }

    pub fn write(&mut self, l: &Loc, v: Value) -> bool {
        match self.var_mut(l.frame, &l.var).and_then(|x| x.at_mut(&l.fields)) {
            Some(slot) => {
                *slot = v;
                true
            }
            None => false,
        }
    }

    /// Resolve a place expression in the active frame.
    pub fn eval_place(&self, p: &PlaceExpr) -> Option<Loc> {
        let frame = self.top();
        self.var(frame, &p.root)?;
        let mut l = Loc {
            frame,
            var: p.root.clone(),
            fields: Vec::new(),
        };
        for s in &p.path {
            match s {
                Seg::Field(n) => l.fields.push(*n),
                Seg::Deref => match self.read(&l)? {
                    Value::Ptr(t) => l = t.clone(),
                    _ => return None,
                },
            }
        }
        self.read(&l)?;
        Some(l)
    }

    pub fn get(&self, p: &PlaceExpr) -> Option<&Value> {
        self.read(&self.eval_place(p)?)
    }

    /// Every leaf location in the stack with its value.
    pub fn leaves(&self) -> Vec<(Loc, Value)> {
        let mut out = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            for (v, x) in &f.vars {
                let mut ls = Vec::new();
                x.leaves(&mut Vec::new(), &mut ls);
                for (fields, val) in ls {
                    out.push((
                        Loc {
                            frame: i,
                            var: v.clone(),
                            fields,
                        },
                        val,
                    ));
                }
            }
        }
        out
    }
}
