//! Command-line and HTTP front ends for oxflow.

pub mod commands;
pub mod server;
