//! Synthetic crowded-room data: scenes, sparse depth and pose noise.

pub mod perturb;
pub mod scene;
pub mod sparsify;
pub mod texture;

pub use perturb::perturb_pose;
pub use scene::{generate_scene, render, Hit, PedestrianSpec, RoomConfig, Scene, SceneConfig, Surface, SyntheticFrame};
pub use sparsify::{gradient_magnitude, sparsify, SparsifyMode, MAX_SPARSE_POINTS};
pub use texture::{value_noise, TextureSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numeric::mix_seed;
use crate::optim::{FrameBundle, FrameData, NeighborFrame};
use crate::raster::{DepthField, SparseDepth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleOptions {
    pub mode: SparsifyMode,
    pub max_points: usize,
    pub seed: u64,
    /// Rotation noise applied to every frame's pose, degrees.
    pub pose_noise_deg: f64,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self { mode: SparsifyMode::Feature, max_points: MAX_SPARSE_POINTS, seed: 0, pose_noise_deg: 0.0 }
    }
}

/// Frame data as a reconstruction pipeline would see it.
///
/// Sparse points sit at feature locations of the true image. With pose
/// noise, both the reported pose and the sparse depths come from the
/// perturbed camera, as if the 3D model were projected with a wrong pose.
pub fn observe_frame(scene: &Scene, t: usize, opts: &BundleOptions) -> Result<FrameData> {
    let frame = &scene.frames[t];
    let picked = sparsify(&frame.depth, &frame.image, &frame.instances, opts.mode, opts.max_points, mix_seed(&[opts.seed, t as u64]))?;
    let (pose, sparse) = if opts.pose_noise_deg > 0.0 {
        let noisy = perturb_pose(&frame.pose, opts.pose_noise_deg, mix_seed(&[opts.seed, 0x5eed, t as u64]))?;
        let seen = render(&scene.config, t, &noisy)?;
        let (w, h) = seen.depth.dims();
        let points: Vec<_> = picked.points().into_iter().map(|(u, v, _)| (u, v, seen.depth.values()[v * w + u])).collect();
        (noisy, SparseDepth::from_points(w, h, &points)?)
    } else {
        (frame.pose, picked)
    };
    Ok(FrameData {
        image: frame.image.clone(),
        pose,
        instances: frame.instances.clone(),
        sparse,
        ground_truth: Some(frame.depth.clone()),
    })
}

/// Bundle for frame `t` with its existing temporal neighbours `t-1`, `t+1`.
pub fn build_bundle(scene: &Scene, t: usize, opts: &BundleOptions) -> Result<FrameBundle> {
    if t >= scene.frames.len() {
        return Err(Error::InvalidArgument(format!("frame {t} out of {}", scene.frames.len())));
    }
    let mut neighbors = Vec::new();
    for tp in [t.checked_sub(1), Some(t + 1)].into_iter().flatten() {
        if tp < scene.frames.len() {
            neighbors.push(NeighborFrame { frame: observe_frame(scene, tp, opts)?, flow: scene.flow(t, tp)? });
        }
    }
    Ok(FrameBundle {
        intrinsics: *scene.intrinsics(),
        frame_index: t as u64,
        target: observe_frame(scene, t, opts)?,
        neighbors,
    })
}

/// `depth · exp(N(0, sigma²))` per valid pixel, drawn in row-major order.
pub fn lognormal_noise(depth: &DepthField, sigma: f64, seed: u64) -> Result<DepthField> {
    let bad = || Error::InvalidArgument(format!("noise sigma {sigma} must be finite and non-negative"));
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(bad());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| bad())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(depth.map_valid(|_, d| d * normal.sample(&mut rng).exp()))
}
