//! Multi-modal ultrasound scanning skill learning: a synthetic phantom,
//! a from-scratch network stack, behavior cloning, a state-quality head and
//! guided post-optimization.

// NaN must fail the validation checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod guided;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
