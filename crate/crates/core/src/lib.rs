//! Delay-compensated backstepping boundary control for 2x2 linear hyperbolic
//! systems with an input delay: kernel solvers, the feedback law, an upwind
//! closed-loop simulator and a delay-mismatch robustness scan.
// Index loops are the clearest way to write stencils; negated comparisons
// are used on purpose so that NaN fails validation.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod error;
pub mod kernels;
pub mod pipeline;
pub mod plant;
pub mod robustness;
pub mod simulator;

pub use error::{Error, Result};
