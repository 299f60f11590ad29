//! Scale constraint tying sampled pedestrian depths to the ground under their feet.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ground::{contact_patch, ContactPatch, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::losses::LossResult;
use crate::numeric::{mix_seed, pairwise_sum, sign};
use crate::raster::{same_dims, DepthField, InstanceMask, Mask};

/// Default fraction of each instance's pixels sampled per evaluation.
pub const SAMPLE_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalScaleConfig {
    pub sample_ratio: f64,
    pub patch_size: usize,
    pub seed: u64,
    pub frame_index: u64,
    /// Treat the median anchor as a constant in the gradient.
    pub detach_anchor: bool,
}

impl Default for NormalScaleConfig {
    fn default() -> Self {
        Self { sample_ratio: SAMPLE_RATIO, patch_size: PATCH_SIZE, seed: 0, frame_index: 0, detach_anchor: false }
    }
}

/// `ceil(ratio * n)`, robust to products like `0.3 * 10` landing a hair above an integer.
pub fn sample_count(ratio: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = ratio * n as f64;
    ((raw - raw.abs() * 1e-12).ceil() as usize).clamp(1, n)
}

/// Pixels of one instance chosen for the loss, in ascending index order.
pub fn sample_instance_pixels(pixels: &[usize], ratio: f64, seed: u64, frame_index: u64, instance: u16) -> Vec<usize> {
    let m = sample_count(ratio, pixels.len());
    if m == pixels.len() {
        return pixels.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, frame_index, u64::from(instance)]));
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pixels.len(), m)
        .into_iter()
        .map(|j| pixels[j])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Per-instance diagnostics from one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTerm {
    pub patch: ContactPatch,
    pub sampled: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalScaleResult {
    pub loss: LossResult,
    pub instances: Vec<InstanceTerm>,
}

pub fn normal_scale_loss(
    depth: &DepthField,
    instances: &InstanceMask,
    ground: &Mask,
    cfg: &NormalScaleConfig,
) -> Result<NormalScaleResult> {
    if !(cfg.sample_ratio > 0.0 && cfg.sample_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("sample ratio {} not in (0, 1]", cfg.sample_ratio)));
    }
    same_dims(depth.dims(), instances.dims())?;
    let n = depth.len();
    let mut grad = vec![0.0; n];
    let mut per_instance = Vec::new();
    let mut totals = Vec::new();
    for k in instances.instance_ids() {
        let patch = contact_patch(instances, k, ground, depth, cfg.patch_size)?;
        let (Some(anchor), Some(anchor_px)) = (patch.anchor, patch.anchor_pixel) else {
            log::debug!("normal_scale_loss: instance {k} has no ground under its contact patch");
            continue;
        };
        let pixels: Vec<usize> = instances.pixels_of(k).into_iter().filter(|&i| depth.is_valid(i)).collect();
        let sampled = sample_instance_pixels(&pixels, cfg.sample_ratio, cfg.seed, cfg.frame_index, k);
        let mut terms = Vec::with_capacity(sampled.len());
        for &p in &sampled {
            let d = depth.values()[p];
            let r = d - anchor;
            terms.push(r.abs() / d);
            grad[p] += sign(r) * anchor / (d * d);
            if !cfg.detach_anchor {
                grad[anchor_px] -= sign(r) / d;
            }
        }
        let value = pairwise_sum(&terms);
        totals.push(value);
        per_instance.push(InstanceTerm { patch, sampled, value });
    }
    if per_instance.is_empty() {
        return Ok(NormalScaleResult { loss: LossResult::zero(n), instances: per_instance });
    }
    Ok(NormalScaleResult { loss: LossResult::new(pairwise_sum(&totals), grad), instances: per_instance })
}
