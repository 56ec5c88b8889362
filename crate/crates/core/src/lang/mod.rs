//! Surface language: syntax tree, parser, printer and place metafunctions.

pub mod ast;
pub mod parse;
pub mod places;
pub mod pretty;

pub use ast::*;
pub use parse::{parse, parse_expr, parse_located, ParseError};
