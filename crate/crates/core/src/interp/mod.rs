//! Big-step evaluation over a stack of frames.

pub mod eval;
pub mod value;

pub use eval::{EvalError, Interp, NoObserver, Observer, DEFAULT_BUDGET};
pub use value::{Frame, Loc, Stack, Value};
