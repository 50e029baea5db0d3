// negated comparisons double as NaN rejection in argument checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod credit;
pub mod error;
pub mod fdcore;
pub mod harness;
pub mod mlmc;
pub mod particles;
pub mod paths;
pub mod regression;
pub mod stability;

pub use error::{Error, Result};
