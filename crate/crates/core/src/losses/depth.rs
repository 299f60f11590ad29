use super::LossResult;
use crate::error::Result;
use crate::numeric::{pairwise_sum, sign};
use crate::raster::{same_dims, DepthField, SparseDepth};

/// Absolute-scale L1 depth loss, summed over the sparse support Ω.
pub fn depth_loss(pred: &DepthField, sparse: &SparseDepth) -> Result<LossResult> {
    same_dims(pred.dims(), sparse.dims())?;
    let target = sparse.field();
    let n = pred.len();
    let mut residuals = Vec::new();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        if !target.is_valid(i) {
            continue;
        }
        if !pred.is_valid(i) {
            log::warn!("depth_loss: prediction invalid at sparse pixel {i}; skipped");
            continue;
        }
        let r = pred.values()[i] - target.values()[i];
        residuals.push(r.abs());
        grad[i] = sign(r);
    }
    if residuals.is_empty() {
        log::debug!("depth_loss: no valid sparse points");
        return Ok(LossResult::zero(n));
    }
    Ok(LossResult::new(pairwise_sum(&residuals), grad))
}
