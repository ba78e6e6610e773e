//! Multiplex-network graph signal processing for hyperspectral image
//! segmentation, classification and boundary detection.

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod cluster;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mln;
pub mod seed;
pub mod superpixel;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
