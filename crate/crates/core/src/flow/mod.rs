//! Dependency-context inference.

pub mod mode;
pub mod policy;
pub mod theta;
pub mod typed;

pub use mode::{Bug, FlowConfig, Mode};
pub use theta::{Kappa, Theta};
pub use typed::{analyze_fn, analyze_from, summarize, FlowResult, Recording, Summary};
