//! Loss terms defined on the static scene.
//!
//! Every term returns a [`LossResult`] whose gradient is taken with respect to
//! metric depth `D` at each pixel. The optimizer chains it through its own
//! depth parameterization.

pub mod depth;
pub mod photometric;
pub mod smoothness;
pub mod ssim;

pub use depth::depth_loss;
pub use photometric::{photometric_loss, PhotometricSource, PHOTOMETRIC_ALPHA};
pub use smoothness::{smoothness_loss, smoothness_terms};
pub use ssim::{ssim_map, SSIM_C1, SSIM_C2};

use crate::raster::Mask;

/// Value, depth gradient and diagnostics of one loss term.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// `d value / d D(p)`; zero where a pixel does not influence the loss.
    pub grad: Vec<f64>,
    /// Per-pixel error, when the term has one (NaN where undefined).
    pub error_map: Option<Vec<f64>>,
    /// Pixels that survived masking, when the term masks.
    pub kept: Option<Mask>,
    /// Set when the term had nothing to reduce over and returned 0.
    pub empty: bool,
}

impl LossResult {
    pub fn zero(len: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; len], error_map: None, kept: None, empty: true }
    }

    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Self { value, grad, error_map: None, kept: None, empty: false }
    }
}
