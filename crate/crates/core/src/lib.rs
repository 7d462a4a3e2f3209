//! Positive definite kernels on Euclidean, product and hyperbolic domains,
//! with finite-sample certificates for PD, SPD, CND, metrizability and
//! hyperbolicity.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cnd;
pub mod error;
pub mod families;
pub mod functions;
pub mod hyperbolic;
pub mod kernel;
pub mod mmd;
pub mod numerics;
pub mod report;

pub use error::{Error, Result};
pub use kernel::{gram, GramMatrix, KernelSpec, Point};
pub use report::{ClassReport, Witness};
