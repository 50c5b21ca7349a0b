//! Concentration bounds, canonical reduced states and samplers for random
//! pure states with a fixed energy expectation value.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod roots;
pub mod spectrum;
pub mod bounds;
pub mod canonical;
pub mod cli;
pub mod density;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
