//! Direct per-frame depth optimization for scenes with moving pedestrians.

// `!(x > 0.0)` deliberately rejects NaN; index loops walk several parallel buffers.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dynamic;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod numeric;
pub mod optim;
pub mod raster;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
