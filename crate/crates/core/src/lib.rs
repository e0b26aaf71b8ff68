#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dyadic;
pub mod error;
pub mod evaluator;
pub mod frac;
pub mod oracle;
pub mod quadrature;
pub mod series;
pub mod special;
pub mod summation;
pub mod vk;

pub use error::{Error, Result};
