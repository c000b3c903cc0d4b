// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod ensemble;
pub mod error;
pub mod quadrature;
pub mod quantum;
pub mod resonance;
pub mod units;

pub use error::{Error, Result};
