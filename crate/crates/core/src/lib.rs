//! Closed-loop traffic simulation with a trainable trajectory scoring head.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod candidates;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod log;
pub mod metrics;
pub mod objectives;
pub mod policy;
pub mod reward;
pub mod sim;
pub mod trainer;
pub mod worldmap;

pub use error::{Error, Result};
