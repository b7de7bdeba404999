//! Experiment driver behind the `ftrl-bargain` binary.

pub mod commands;
pub mod config;
pub mod output;
