// NaN must fail threshold checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod kpi;
pub mod netsim;
pub mod data;
pub mod harness;
pub mod learn;
pub mod assure;
pub mod pipeline;
pub mod runtime;

pub use error::{Error, Result};
