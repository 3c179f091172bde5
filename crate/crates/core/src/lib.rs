//! Serverless function placement and request routing on edge topologies.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod env;
pub mod error;
pub mod lp;
pub mod model;
pub mod presets;
pub mod rl;
pub mod routing;
pub mod verify;
pub mod workload;

pub use error::{Error, Result};
