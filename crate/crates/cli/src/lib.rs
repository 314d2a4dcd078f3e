//! Library surface of the experiment runner; the binary in `main.rs` is a
//! thin argument-parsing shell so integration tests can drive commands
//! directly.

// `!(x > 0)` guards intentionally reject NaN config values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
