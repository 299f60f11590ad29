//! Sparse depth sampling that mimics structure-from-motion point density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{same_dims, DepthField, ImageRgb, InstanceMask, SparseDepth};

/// Default cap on the number of sparse points.
pub const MAX_SPARSE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsifyMode {
    /// Uniform random valid pixels.
    Uniform,
    /// Strongest image-gradient pixels after 3×3 non-maximum suppression.
    Feature,
}

/// Central-difference gradient magnitude of the grey image (replicated edges).
pub fn gradient_magnitude(image: &ImageRgb) -> Vec<f64> {
    let (w, h) = image.dims();
    let g = image.gray();
    let at = |u: usize, v: usize| g[v * w + u];
    (0..w * h)
        .map(|i| {
            let (u, v) = (i % w, i / w);
            let gx = at((u + 1).min(w - 1), v) - at(u.saturating_sub(1), v);
            let gy = at(u, (v + 1).min(h - 1)) - at(u, v.saturating_sub(1));
            (gx * gx + gy * gy).sqrt() / 2.0
        })
        .collect()
}

fn feature_candidates(image: &ImageRgb, valid: &[bool]) -> Vec<usize> {
    let (w, h) = image.dims();
    let mag = gradient_magnitude(image);
    let mut keep: Vec<usize> = (0..w * h)
        .filter(|&i| valid[i])
        .filter(|&i| {
            let (u, v) = (i % w, i / w);
            // ties survive so flat regions are not wiped out
            (v.saturating_sub(1)..=(v + 1).min(h - 1))
                .flat_map(|y| (u.saturating_sub(1)..=(u + 1).min(w - 1)).map(move |x| y * w + x))
                .all(|j| mag[j] <= mag[i])
        })
        .collect();
    keep.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    keep
}

/// Picks at most `max_n` pixels of `dense`, then drops any that land on a
/// pedestrian, so the output can hold fewer than `max_n` points.
pub fn sparsify(
    dense: &DepthField,
    image: &ImageRgb,
    instances: &InstanceMask,
    mode: SparsifyMode,
    max_n: usize,
    seed: u64,
) -> Result<SparseDepth> {
    same_dims(dense.dims(), image.dims())?;
    same_dims(dense.dims(), instances.dims())?;
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be at least 1".into()));
    }
    let valid: Vec<usize> = (0..dense.len()).filter(|&i| dense.is_valid(i)).collect();
    if valid.is_empty() {
        return Err(Error::Empty("dense depth has no valid pixel".into()));
    }
    let mut chosen: Vec<usize> = match mode {
        SparsifyMode::Uniform => {
            let m = max_n.min(valid.len());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, valid.len(), m).into_iter().map(|j| valid[j]).collect()
        }
        SparsifyMode::Feature => {
            let mut c = feature_candidates(image, dense.valid());
            c.truncate(max_n);
            c
        }
    };
    chosen.retain(|&i| instances.ids()[i] == 0);
    chosen.sort_unstable();
    if chosen.is_empty() {
        log::info!("sparsify: every selected point fell on a pedestrian");
    }
    let (w, h) = dense.dims();
    let points: Vec<(usize, usize, f64)> = chosen.iter().map(|&i| (i % w, i / w, dense.values()[i])).collect();
    SparseDepth::from_points(w, h, &points)
}
