//! Ground detection from normals and contact patches under pedestrians.

use nalgebra::Vector3;

use super::normals::NormalMap;
use crate::error::{Error, Result};
use crate::numeric::lower_median_index;
use crate::raster::{same_dims, DepthField, InstanceMask, Mask};

/// Default ground direction in the camera frame (+y points down).
pub const GROUND_NORMAL: [f64; 3] = [0.0, 1.0, 0.0];
/// Default angular threshold for ground membership, degrees.
pub const GROUND_THRESHOLD_DEG: f64 = 15.0;
/// Default contact patch side, pixels.
pub const PATCH_SIZE: usize = 20;

// Angles this close to the threshold count as on the boundary and are excluded,
// so the strict inequality survives rounding in the normal computation.
const BOUNDARY_TOL_DEG: f64 = 1e-9;

/// Pixels whose normal lies strictly within `threshold_deg` of `n_tilde`.
///
/// Normals face the camera, so `n_tilde` is first flipped into the
/// camera-facing (`y <= 0`) hemisphere.
pub fn ground_mask(normals: &NormalMap, n_tilde: Vector3<f64>, threshold_deg: f64) -> Result<Mask> {
    let norm = n_tilde.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("ground normal must be nonzero".into()));
    }
    let mut r = n_tilde / norm;
    if r.y > 0.0 {
        r = -r;
    }
    let bits = normals
        .normals
        .iter()
        .zip(&normals.valid)
        .map(|(n, ok)| {
            if !ok {
                return false;
            }
            let angle = r.cross(n).norm().atan2(r.dot(n)).to_degrees();
            angle < threshold_deg - BOUNDARY_TOL_DEG
        })
        .collect();
    Ok(Mask::new(normals.width, normals.height, bits))
}

/// Half-open pixel rectangle `[u0, u1) x [v0, v1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRect {
    pub u0: usize,
    pub v0: usize,
    pub u1: usize,
    pub v1: usize,
}

impl PatchRect {
    /// `size x size` box centred on `(u, v)`, clipped to the image.
    pub fn centred(u: usize, v: usize, size: usize, width: usize, height: usize) -> Self {
        let half = size / 2;
        Self {
            u0: u.saturating_sub(half),
            v0: v.saturating_sub(half),
            u1: (u + size - half).min(width),
            v1: (v + size - half).min(height),
        }
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u >= self.u0 && u < self.u1 && v >= self.v0 && v < self.v1
    }

    pub fn area(&self) -> usize {
        (self.u1 - self.u0) * (self.v1 - self.v0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPatch {
    pub instance: u16,
    /// Lowest instance pixel (max `v`, then min `u`).
    pub bottom: (usize, usize),
    pub rect: PatchRect,
    /// Row-major pixel indices in `rect ∩ G` with valid depth.
    pub candidates: Vec<usize>,
    /// Lower-median depth over the candidates.
    pub anchor: Option<f64>,
    pub anchor_pixel: Option<usize>,
}

pub fn contact_patch(
    instances: &InstanceMask,
    k: u16,
    ground: &Mask,
    depth: &DepthField,
    patch_size: usize,
) -> Result<ContactPatch> {
    same_dims(instances.dims(), ground.dims())?;
    same_dims(instances.dims(), depth.dims())?;
    let (w, h) = instances.dims();
    // row-major: the last pixel sits on the bottom row, whose first pixel has the smallest u
    let pixels = instances.pixels_of(k);
    let &last = pixels.last().ok_or_else(|| Error::Empty(format!("instance {k} has no pixels")))?;
    let v_max = last / w;
    let first_in_row = pixels.iter().find(|&&i| i / w == v_max).copied().unwrap_or(last);
    let bottom = (first_in_row % w, v_max);
    let rect = PatchRect::centred(bottom.0, bottom.1, patch_size, w, h);

    let mut candidates = Vec::new();
    for v in rect.v0..rect.v1 {
        for u in rect.u0..rect.u1 {
            let i = v * w + u;
            if ground.bits[i] && depth.is_valid(i) {
                candidates.push(i);
            }
        }
    }
    let depths: Vec<f64> = candidates.iter().map(|&i| depth.values()[i]).collect();
    let anchor_pixel = lower_median_index(&depths).map(|j| candidates[j]);
    Ok(ContactPatch {
        instance: k,
        bottom,
        rect,
        anchor: anchor_pixel.map(|i| depth.values()[i]),
        anchor_pixel,
        candidates,
    })
}
