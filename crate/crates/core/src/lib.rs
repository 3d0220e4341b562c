// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod hopkins;
pub mod panel;
pub mod rng;
pub mod sim;
pub mod special;
pub mod tailfit;
pub mod truncnorm;

pub use error::{Error, Result};
