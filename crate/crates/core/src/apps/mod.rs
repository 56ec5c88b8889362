//! Slicing, information flow control, mode ablation and the JSON API.

pub mod ablation;
pub mod ifc;
pub mod report;
pub mod service;
pub mod slice;

pub use ablation::{ablation_report, median, pct_increase, AblationReport, AblationRow, ModeSummary};
pub use ifc::{ifc_check, IfcPolicy, IfcViolation};
pub use report::{check_json, flow_json};
pub use service::{Response, Service, SliceRequest};
pub use slice::{location_deps, slice, Direction, SliceError, SliceOutput, Target};
