//! Ownership checking with loan sets.

pub mod check;
pub mod env;
pub mod error;

pub use check::{check_fn, check_report, subtype, typecheck, CallFact, FnReport, LocFacts, TypedFn, TypedProgram};
pub use env::{propagate_loans, show_loans, Loan, LoanSet, ResolveOpts, TypeEnv};
pub use error::{ErrorKind, TypeError};
