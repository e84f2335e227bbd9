//! Limiting free energy of multi-layer generalized linear models.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hopf;
pub mod interp;
pub mod model;
pub mod optimize;
pub mod potentials;
pub mod saddle;
pub mod simulate;
pub mod quadrature;
pub mod recursion;

pub use error::{Error, ErrorCategory, Result};
