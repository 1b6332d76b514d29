// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod tasks;
pub mod verify;
pub mod wingrad;

pub use error::{Error, Result};
