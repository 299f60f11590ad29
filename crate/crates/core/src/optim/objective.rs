//! The weighted total objective and its gradient in log-depth.

use nalgebra::Vector3;

use crate::dynamic::{
    flow_shape_loss, ground_mask, normal_scale_loss, overlap_mask, surface_normals, NormalScaleConfig,
    GROUND_NORMAL, GROUND_THRESHOLD_DEG, PATCH_SIZE, SAMPLE_RATIO,
};
use crate::error::{Error, Result};
use crate::geometry::{relative_pose, Intrinsics, PoseSe3};
use crate::losses::{depth_loss, photometric_loss, smoothness_loss, PhotometricSource, PHOTOMETRIC_ALPHA};
use crate::raster::{same_dims, DepthField, FlowField, ImageRgb, InstanceMask, Mask, SparseDepth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub depth: f64,
    pub photometric: f64,
    pub smoothness: f64,
    pub flow_shape: f64,
    pub normal_scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { depth: 0.001, photometric: 1.0, smoothness: 0.3, flow_shape: 0.1, normal_scale: 0.001 }
    }
}

impl LossWeights {
    pub const ZERO: Self = Self { depth: 0.0, photometric: 0.0, smoothness: 0.0, flow_shape: 0.0, normal_scale: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let all = [self.depth, self.photometric, self.smoothness, self.flow_shape, self.normal_scale];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights must be finite and non-negative: {self:?}")))
        }
    }
}

/// How the smoothness sum is reduced inside the total objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Plain sum over the region.
    Sum,
    /// Sum divided by the region size, putting the term on the per-pixel
    /// scale of the photometric mean.
    #[default]
    Mean,
}

/// Hyperparameters of the individual terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSettings {
    pub alpha: f64,
    pub ground_normal: [f64; 3],
    pub ground_threshold_deg: f64,
    pub patch_size: usize,
    pub sample_ratio: f64,
    pub detach_anchor: bool,
    pub smoothness_reduction: Reduction,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            alpha: PHOTOMETRIC_ALPHA,
            ground_normal: GROUND_NORMAL,
            ground_threshold_deg: GROUND_THRESHOLD_DEG,
            patch_size: PATCH_SIZE,
            sample_ratio: SAMPLE_RATIO,
            detach_anchor: false,
            smoothness_reduction: Reduction::Mean,
        }
    }
}

/// Everything known about one frame.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub image: ImageRgb,
    /// Camera-to-world pose.
    pub pose: PoseSe3,
    pub instances: InstanceMask,
    pub sparse: SparseDepth,
    pub ground_truth: Option<DepthField>,
}

/// A temporally adjacent frame plus the flow `F_{t'->t}`, stored on the
/// target grid: target pixel `p` corresponds to `p + F(p)` in the neighbour.
#[derive(Debug, Clone)]
pub struct NeighborFrame {
    pub frame: FrameData,
    pub flow: FlowField,
}

#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub intrinsics: Intrinsics,
    pub frame_index: u64,
    pub target: FrameData,
    pub neighbors: Vec<NeighborFrame>,
}

impl FrameBundle {
    pub fn dims(&self) -> (usize, usize) {
        self.intrinsics.dims()
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let dims = self.dims();
        let check = |f: &FrameData| -> Result<()> {
            same_dims(dims, f.image.dims())?;
            same_dims(dims, f.instances.dims())?;
            same_dims(dims, f.sparse.dims())?;
            if let Some(gt) = &f.ground_truth {
                same_dims(dims, gt.dims())?;
            }
            f.pose.validate(1e-6)
        };
        check(&self.target)?;
        for n in &self.neighbors {
            check(&n.frame)?;
            same_dims(dims, n.flow.dims())?;
        }
        Ok(())
    }
}

/// Unconstrained log-depth `s` with `D = exp(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVariable {
    pub width: usize,
    pub height: usize,
    pub s: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthVariable {
    pub fn from_depth(depth: &DepthField) -> Self {
        let (width, height) = depth.dims();
        let s = depth
            .values()
            .iter()
            .zip(depth.valid())
            .map(|(d, ok)| if *ok { d.ln() } else { 0.0 })
            .collect();
        Self { width, height, s, valid: depth.valid().to_vec() }
    }

    pub fn to_depth(&self) -> DepthField {
        self.with_values(&self.s)
    }

    /// Decodes an alternative `s` vector under this variable's validity.
    pub fn with_values(&self, s: &[f64]) -> DepthField {
        let values = s
            .iter()
            .zip(&self.valid)
            .map(|(x, ok)| if *ok { x.exp() } else { f64::NAN })
            .collect();
        DepthField::from_parts(self.width, self.height, values, self.valid.clone())
            .expect("exp keeps valid depths positive")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TermValues {
    pub depth: f64,
    pub photometric: f64,
    pub smoothness: f64,
    pub flow_shape: f64,
    pub normal_scale: f64,
}

impl TermValues {
    pub fn weighted_sum(&self, w: &LossWeights) -> f64 {
        w.depth * self.depth
            + w.photometric * self.photometric
            + w.smoothness * self.smoothness
            + w.flow_shape * self.flow_shape
            + w.normal_scale * self.normal_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    /// Unweighted term values; terms with zero weight are not evaluated and read 0.
    pub terms: TermValues,
    /// `d value / d s` for the target frame.
    pub grad: Vec<f64>,
    /// `d value / d s` for each neighbour depth variable.
    pub neighbor_grads: Vec<Vec<f64>>,
}

fn accumulate(into: &mut [f64], weight: f64, grad: &[f64]) {
    for (a, g) in into.iter_mut().zip(grad) {
        *a += weight * g;
    }
}

/// Ground mask of a depth field under the given settings.
pub fn ground_of(depth: &DepthField, k: &Intrinsics, settings: &LossSettings) -> Result<Mask> {
    let normals = surface_normals(depth, k)?;
    ground_mask(&normals, Vector3::from(settings.ground_normal), settings.ground_threshold_deg)
}

/// Weighted sum of the five terms with its gradient in log-depth.
///
/// `neighbor_depths` holds the current log-depth of each neighbour frame and
/// is only read by the flow-guided shape term. `sample_seed` drives the
/// pixel sampling of the scale term.
pub fn total_loss(
    bundle: &FrameBundle,
    target: &DepthVariable,
    neighbor_depths: &[DepthVariable],
    weights: &LossWeights,
    settings: &LossSettings,
    sample_seed: u64,
) -> Result<TotalLoss> {
    weights.validate()?;
    let k = &bundle.intrinsics;
    let depth = target.to_depth();
    same_dims(k.dims(), depth.dims())?;
    let n = depth.len();
    let mut terms = TermValues::default();
    let mut grad_d = vec![0.0; n];
    let mut neighbor_grad_d: Vec<Vec<f64>> = vec![vec![0.0; n]; bundle.neighbors.len()];

    if weights.depth > 0.0 {
        let r = depth_loss(&depth, &bundle.target.sparse)?;
        terms.depth = r.value;
        accumulate(&mut grad_d, weights.depth, &r.grad);
    }

    if weights.photometric > 0.0 {
        let sources = bundle
            .neighbors
            .iter()
            .map(|nb| {
                Ok(PhotometricSource {
                    image: &nb.frame.image,
                    pose: relative_pose(&bundle.target.pose, &nb.frame.pose)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let r = photometric_loss(&bundle.target.image, &sources, &depth, k, settings.alpha)?;
        terms.photometric = r.value;
        accumulate(&mut grad_d, weights.photometric, &r.grad);
    }

    if weights.smoothness > 0.0 {
        let region = bundle.target.instances.humans().complement();
        let r = smoothness_loss(&depth, &bundle.target.image, &region)?;
        let scale = match settings.smoothness_reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / region.count().max(1) as f64,
        };
        terms.smoothness = r.value * scale;
        accumulate(&mut grad_d, weights.smoothness * scale, &r.grad);
    }

    if weights.flow_shape > 0.0 {
        if neighbor_depths.len() != bundle.neighbors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} neighbour depths for {} neighbours",
                neighbor_depths.len(),
                bundle.neighbors.len()
            )));
        }
        let mut values = Vec::new();
        let mut parts = Vec::new();
        for (j, (nb, var)) in bundle.neighbors.iter().zip(neighbor_depths).enumerate() {
            let overlap = overlap_mask(&bundle.target.instances, &nb.frame.instances, &nb.flow)?;
            if overlap.count() == 0 {
                continue;
            }
            let (r, g_nb) = flow_shape_loss(&depth, &var.to_depth(), &nb.flow, &overlap)?;
            values.push(r.value);
            parts.push((j, r.grad, g_nb));
        }
        // averaged over the neighbours that actually overlap
        if !values.is_empty() {
            let inv = 1.0 / values.len() as f64;
            terms.flow_shape = values.iter().sum::<f64>() * inv;
            for (j, g_t, g_nb) in parts {
                accumulate(&mut grad_d, weights.flow_shape * inv, &g_t);
                accumulate(&mut neighbor_grad_d[j], weights.flow_shape * inv, &g_nb);
            }
        }
    }

    if weights.normal_scale > 0.0 {
        let ground = ground_of(&depth, k, settings)?;
        let cfg = NormalScaleConfig {
            sample_ratio: settings.sample_ratio,
            patch_size: settings.patch_size,
            seed: sample_seed,
            frame_index: bundle.frame_index,
            detach_anchor: settings.detach_anchor,
        };
        let r = normal_scale_loss(&depth, &bundle.target.instances, &ground, &cfg)?;
        terms.normal_scale = r.loss.value;
        accumulate(&mut grad_d, weights.normal_scale, &r.loss.grad);
    }

    // chain through D = exp(s)
    let grad = grad_d
        .iter()
        .zip(depth.values())
        .zip(depth.valid())
        .map(|((g, d), ok)| if *ok { g * d } else { 0.0 })
        .collect();
    let neighbor_grads = neighbor_grad_d
        .into_iter()
        .zip(neighbor_depths)
        .map(|(g, var)| {
            g.iter()
                .zip(&var.s)
                .zip(&var.valid)
                .map(|((g, s), ok)| if *ok { g * s.exp() } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(TotalLoss { value: terms.weighted_sum(weights), terms, grad, neighbor_grads })
}
