use std::fmt;

use serde::Serialize;

use crate::lang::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    TypeMismatch,
    UseAfterMove,
    OwnershipViolation,
    ArityOrProvenanceMismatch,
    UnknownFunction,
    UnknownVariable,
    UnknownProvenance,
    EscapingBorrow,
    Shadowing,
    InvalidPlace,
    NoFixpoint,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
pub struct TypeError {
    pub kind: ErrorKind,
    pub message: String,
    pub location: Option<u32>,
    pub span: Option<Span>,
}

impl TypeError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> TypeError {
        TypeError {
            kind,
            message: message.into(),
            location: None,
            span: None,
        }
    }

    /// Attach a position unless one is already present.
    pub fn at(mut self, location: u32, span: Span) -> TypeError {
        if self.location.is_none() {
            self.location = Some(location);
            self.span = Some(span);
        }
        self
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.span {
            write!(f, "{}:{}: ", s.line, s.col)?;
        }
        write!(f, "{}: {}", self.kind, self.message)
    }
}
