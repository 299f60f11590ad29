//! Edge-aware first-order smoothness of mean-normalised inverse depth.

use super::LossResult;
use crate::dynamic::inverse_depth::mean_normalized_inverse_depth;
use crate::error::Result;
use crate::numeric::{pairwise_sum, sign};
use crate::raster::{same_dims, DepthField, ImageRgb, Mask, ScalarMap};

/// Channel-mean absolute forward difference of the image; 0 on the last column/row.
fn image_edges(image: &ImageRgb) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = image.dims();
    let px = image.pixels();
    let diff = |a: [f64; 3], b: [f64; 3]| {
        ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if u + 1 < w {
                gx[i] = diff(px[i + 1], px[i]);
            }
            if v + 1 < h {
                gy[i] = diff(px[i + w], px[i]);
            }
        }
    }
    (gx, gy)
}

/// Smoothness evaluated directly on `d*`; returns the value and `dL/dd*`.
pub fn smoothness_terms(dstar: &ScalarMap, image: &ImageRgb, region: &Mask) -> Result<(f64, Vec<f64>)> {
    same_dims(dstar.dims(), image.dims())?;
    same_dims(dstar.dims(), region.dims())?;
    let (w, h) = dstar.dims();
    let (ex, ey) = image_edges(image);
    let mut terms = Vec::new();
    let mut grad = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if !region.bits[i] || !dstar.valid[i] {
                continue;
            }
            for (j, edge) in [(u + 1 < w).then(|| (i + 1, ex[i])), (v + 1 < h).then(|| (i + w, ey[i]))]
                .into_iter()
                .flatten()
            {
                if !dstar.valid[j] {
                    continue;
                }
                let weight = (-edge).exp();
                let diff = dstar.values[j] - dstar.values[i];
                terms.push(diff.abs() * weight);
                let g = weight * sign(diff);
                grad[j] += g;
                grad[i] -= g;
            }
        }
    }
    Ok((pairwise_sum(&terms), grad))
}

/// Edge-aware smoothness over `region` (the non-human pixels), with the
/// gradient chained back to depth through `d*`.
pub fn smoothness_loss(depth: &DepthField, image: &ImageRgb, region: &Mask) -> Result<LossResult> {
    same_dims(depth.dims(), region.dims())?;
    if region.count() == 0 {
        return Ok(LossResult::zero(depth.len()));
    }
    let norm = mean_normalized_inverse_depth(depth)?;
    let (value, g_dstar) = smoothness_terms(&norm.map, image, region)?;
    Ok(LossResult::new(value, norm.backprop(depth, &g_dstar)))
}
