use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Modular,
    Whole,
    MutBlind,
    RefBlind,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Modular, Mode::Whole, Mode::MutBlind, Mode::RefBlind];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Modular => "modular",
            Mode::Whole => "whole",
            Mode::MutBlind => "mutblind",
            Mode::RefBlind => "refblind",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected modular, whole, mutblind or refblind)"))
    }
}

/// Deliberate analysis defects used to check that the harness notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Bug {
    /// Branches do not add the condition to written places.
    DropBranchControl,
    /// Plain assignment updates only the exact place.
    DropAssignConflicts,
    /// Call arguments ignore what their shared references reach.
    DropShrdLoans,
    /// Calls do not mutate what their unique references reach.
    DropUniqMutation,
    /// Writes through a reference update only the written expression.
    DropDerefResolution,
}

impl Bug {
    pub const ALL: [Bug; 5] = [
        Bug::DropBranchControl,
        Bug::DropAssignConflicts,
        Bug::DropShrdLoans,
        Bug::DropUniqMutation,
        Bug::DropDerefResolution,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowConfig {
    pub mode: Mode,
    pub bug: Option<Bug>,
    /// Callee nesting allowed before whole-program analysis falls back to signatures.
    pub max_depth: usize,
}

impl FlowConfig {
    pub fn new(mode: Mode) -> FlowConfig {
        FlowConfig {
            mode,
            bug: None,
            max_depth: 32,
        }
    }

    pub fn with_bug(mut self, bug: Bug) -> FlowConfig {
        self.bug = Some(bug);
        self
    }

    pub fn has(&self, bug: Bug) -> bool {
        self.bug == Some(bug)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("fast".parse::<Mode>().is_err());
    }
}
