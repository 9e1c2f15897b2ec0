//! Time-stepped data-center simulator for comparing energy-aware NFV
//! placement and migration policies.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod compare;
pub mod config;
pub mod energy;
pub mod engine;
pub mod error;
pub mod model;
pub mod policies;
pub mod report;
pub mod rng;
pub mod workload;

pub use error::{Error, Result};
