//! Command-line experiments on top of `collapse-core`: JSON configs, CSV
//! output and a rayon trial runner.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod runner;
