#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod combined;
pub mod error;
pub mod harness;
pub mod lindblad;
pub mod purification;
pub mod linalg;
mod ode;
pub mod rng;
pub mod simplex;

pub use error::{Error, Result};
pub use ode::StepControl;
