//! Information flow analysis for a small ownership-typed language.

pub mod lang;
pub mod ownership;
pub mod flow;
pub mod cfg;
pub mod interp;
pub mod harness;
pub mod apps;
