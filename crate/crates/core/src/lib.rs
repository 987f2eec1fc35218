//! Uplink simulator and optimizer for distributed massive MIMO with 1-bit
//! ADCs at remote radio heads (RRHs) and dithering noise.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dither;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod gradients;
pub mod instances;
pub mod linalg;
pub mod linksim;
pub mod power;
pub mod quantized;
pub mod receivers;
pub mod rng;
pub mod units;
pub mod validate;

pub use error::{Error, Result};
