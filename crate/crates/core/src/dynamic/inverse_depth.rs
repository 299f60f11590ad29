use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::raster::{DepthField, ScalarMap};

/// `d* = d / mean(d)` with `d = 1 / D` over valid pixels, plus what is needed
/// to pull gradients back to depth.
#[derive(Debug, Clone)]
pub struct NormalizedInverseDepth {
    pub map: ScalarMap,
    /// Mean inverse depth over valid pixels.
    pub mean: f64,
    count: usize,
}

pub fn mean_normalized_inverse_depth(depth: &DepthField) -> Result<NormalizedInverseDepth> {
    let inv: Vec<f64> = depth
        .values()
        .iter()
        .zip(depth.valid())
        .filter(|(_, ok)| **ok)
        .map(|(d, _)| 1.0 / d)
        .collect();
    if inv.is_empty() {
        return Err(Error::Empty("inverse depth normalisation needs a valid pixel".into()));
    }
    let mean = pairwise_sum(&inv) / inv.len() as f64;
    let (w, h) = depth.dims();
    let mut values = vec![0.0; w * h];
    for i in 0..w * h {
        if depth.is_valid(i) {
            values[i] = (1.0 / depth.values()[i]) / mean;
        }
    }
    Ok(NormalizedInverseDepth {
        map: ScalarMap { width: w, height: h, values, valid: depth.valid().to_vec() },
        mean,
        count: inv.len(),
    })
}

impl NormalizedInverseDepth {
    /// Maps `dL/dd*` to `dL/dD` through the normalisation and the reciprocal.
    pub fn backprop(&self, depth: &DepthField, grad_dstar: &[f64]) -> Vec<f64> {
        let valid = &self.map.valid;
        let dot: Vec<f64> = (0..grad_dstar.len())
            .filter(|&i| valid[i])
            .map(|i| grad_dstar[i] * self.map.values[i])
            .collect();
        let coupling = pairwise_sum(&dot) / self.count as f64;
        (0..grad_dstar.len())
            .map(|i| {
                if !valid[i] {
                    return 0.0;
                }
                let d_inv = (grad_dstar[i] - coupling) / self.mean;
                let z = depth.values()[i];
                -d_inv / (z * z)
            })
            .collect()
    }
}
