//! Randomized testing of noninterference and the supporting lemmas.

pub mod gen;
pub mod lemmas;
pub mod ni;

/// Step limit for one randomized run; longer runs are skipped.
pub const TRIAL_BUDGET: u64 = 20_000;

pub use gen::{agree_on, gen_stack, gen_value};
pub use lemmas::{write_locality, call_frame, call_determinism, LemmaReport};
pub use ni::{check_noninterference, targets, Init, NiReport, NiViolation, Target};
