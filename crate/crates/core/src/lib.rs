// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod projections;
pub mod synthetic;
pub mod twod;
mod serde_mat;

pub use error::{Error, Result};
