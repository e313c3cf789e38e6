//! Numerical core for rotationally symmetric mean curvature flow in
//! `S^n × [-1, 1]`.
//!
//! The crate is `no_std` (with `alloc`): every routine is a pure function of
//! its inputs, so results are reproducible bit for bit.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// A failed run hands back its partial trace.
#![allow(clippy::result_large_err)]

extern crate alloc;

mod math;

pub mod angenent;
pub mod barriers;
pub mod catenoid;
pub mod conformal;
pub mod error;
pub mod family;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod ode;
pub mod quadrature;

pub use error::{Error, Result};

/// Version of this crate, recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
