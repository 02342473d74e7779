//! Batch front-end: configuration, subcommands and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod commands;
pub mod config;
pub mod plot;
pub mod suite;

pub use config::RunConfig;
