//! Config handling, command drivers and parallel Monte Carlo for the
//! `barrier-repl` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod parallel;
