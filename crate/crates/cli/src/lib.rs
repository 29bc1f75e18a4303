//! Experiment driver around `aies-core`: configuration, chain persistence,
//! multi-run protocols and report emission. The `aies` binary in this crate
//! exposes the commands; the modules are public so integration tests can
//! drive the same code paths directly.

// validation guards use the `!(x > bound)` form deliberately so NaN fails
// the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain_io;
pub mod commands;
pub mod config;
pub mod error;
pub mod protocol;
pub mod report;
