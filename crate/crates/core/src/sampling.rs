//! Bilinear / nearest sampling, depth-based view synthesis and flow warping.

use crate::error::Result;
use crate::geometry::{Intrinsics, PixelCoord, PoseSe3, MIN_DEPTH};
use crate::raster::{index, same_dims, DepthField, FlowField, ImageRgb, Mask, ScalarMap};

/// The four taps of a bilinear lookup, ordered (u0,v0), (u1,v0), (u0,v1), (u1,v1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTap {
    pub idx: [usize; 4],
    pub weights: [f64; 4],
    pub fu: f64,
    pub fv: f64,
}

impl BilinearTap {
    /// Taps for sub-pixel `(u, v)`, or `None` when the point is outside
    /// `[0, w-1] x [0, h-1]`. On the last row/column the cell is clamped
    /// inward so all four neighbours exist and the fractional weight is 1.
    pub fn new(width: usize, height: usize, u: f64, v: f64) -> Option<Self> {
        if width == 0 || height == 0 {
            return None;
        }
        let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
        if !(u >= 0.0 && u <= wmax && v >= 0.0 && v <= hmax) {
            return None;
        }
        let (u0, u1, fu) = axis_cell(u, width);
        let (v0, v1, fv) = axis_cell(v, height);
        Some(Self {
            idx: [
                index(width, u0, v0),
                index(width, u1, v0),
                index(width, u0, v1),
                index(width, u1, v1),
            ],
            weights: [(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv), (1.0 - fu) * fv, fu * fv],
            fu,
            fv,
        })
    }

    #[inline]
    pub fn blend(&self, values: &[f64]) -> f64 {
        self.weights[0] * values[self.idx[0]]
            + self.weights[1] * values[self.idx[1]]
            + self.weights[2] * values[self.idx[2]]
            + self.weights[3] * values[self.idx[3]]
    }

    /// `(d/du, d/dv)` of the interpolant inside the current cell.
    #[inline]
    pub fn derivatives(&self, values: &[f64]) -> (f64, f64) {
        let [a, b, c, d] = self.idx.map(|i| values[i]);
        let du = (1.0 - self.fv) * (b - a) + self.fv * (d - c);
        let dv = (1.0 - self.fu) * (c - a) + self.fu * (d - b);
        (du, dv)
    }
}

fn axis_cell(x: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let i0 = (x.floor() as usize).min(n - 2);
    (i0, i0 + 1, x - i0 as f64)
}

/// A sampled value plus whether every needed neighbour existed (and was valid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub value: T,
    pub in_bounds: bool,
}

/// Anything that can be read through a bilinear tap.
pub trait Sampleable {
    type Value: Copy + Default;
    fn dims(&self) -> (usize, usize);
    fn tap_valid(&self, i: usize) -> bool;
    fn blend(&self, tap: &BilinearTap) -> Self::Value;
}

impl Sampleable for ScalarMap {
    type Value = f64;
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    fn tap_valid(&self, i: usize) -> bool {
        self.valid[i]
    }
    fn blend(&self, tap: &BilinearTap) -> f64 {
        tap.blend(&self.values)
    }
}

impl Sampleable for DepthField {
    type Value = f64;
    fn dims(&self) -> (usize, usize) {
        DepthField::dims(self)
    }
    fn tap_valid(&self, i: usize) -> bool {
        self.is_valid(i)
    }
    fn blend(&self, tap: &BilinearTap) -> f64 {
        tap.blend(self.values())
    }
}

impl Sampleable for ImageRgb {
    type Value = [f64; 3];
    fn dims(&self) -> (usize, usize) {
        ImageRgb::dims(self)
    }
    fn tap_valid(&self, _i: usize) -> bool {
        true
    }
    fn blend(&self, tap: &BilinearTap) -> [f64; 3] {
        let px = self.pixels();
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = tap.weights[0] * px[tap.idx[0]][c]
                + tap.weights[1] * px[tap.idx[1]][c]
                + tap.weights[2] * px[tap.idx[2]][c]
                + tap.weights[3] * px[tap.idx[3]][c];
        }
        out
    }
}

pub fn bilinear_sample<F: Sampleable>(field: &F, uv: PixelCoord) -> Sample<F::Value> {
    let (w, h) = field.dims();
    match BilinearTap::new(w, h, uv.u, uv.v) {
        Some(tap) if tap.idx.iter().all(|&i| field.tap_valid(i)) => {
            Sample { value: field.blend(&tap), in_bounds: true }
        }
        _ => Sample { value: F::Value::default(), in_bounds: false },
    }
}

/// Result of synthesizing the target view from a source frame, with the
/// first-order information needed to back-propagate into depth.
#[derive(Debug, Clone)]
pub struct WarpedView {
    /// Synthesized `I'_t`; invalid pixels hold zeros.
    pub image: ImageRgb,
    pub valid: Mask,
    /// Sampling location in the source frame.
    pub coords: Vec<PixelCoord>,
    /// `d(u', v') / dD` at each valid pixel.
    pub coord_grad: Vec<[f64; 2]>,
    /// `d I'(p) / d(u', v')` per channel at each valid pixel.
    pub image_grad: Vec<[[f64; 3]; 2]>,
}

/// Inverse-warps `source` into the target view using target depth and `T_{t->t'}`.
pub fn warp_frame(
    source: &ImageRgb,
    depth: &DepthField,
    k: &Intrinsics,
    t_rel: &PoseSe3,
) -> Result<(ImageRgb, Mask)> {
    let view = warp_view(source, depth, k, t_rel)?;
    Ok((view.image, view.valid))
}

pub fn warp_view(
    source: &ImageRgb,
    depth: &DepthField,
    k: &Intrinsics,
    t_rel: &PoseSe3,
) -> Result<WarpedView> {
    same_dims(k.dims(), depth.dims())?;
    same_dims(k.dims(), source.dims())?;
    let (w, h) = k.dims();
    let n = w * h;
    let identity = t_rel.is_identity();
    let mut pixels = vec![[0.0; 3]; n];
    let mut valid = vec![false; n];
    let mut coords = vec![PixelCoord::new(f64::NAN, f64::NAN); n];
    let mut coord_grad = vec![[0.0; 2]; n];
    let mut image_grad = vec![[[0.0; 3]; 2]; n];
    let channels: [Vec<f64>; 3] =
        [0, 1, 2].map(|c| source.pixels().iter().map(|p| p[c]).collect());

    for v in 0..h {
        for u in 0..w {
            let i = index(w, u, v);
            let Some(d) = depth.get(u, v) else { continue };
            let (uv, duv) = if identity {
                // Pure identity: sampling lands exactly on the pixel centre.
                (PixelCoord::new(u as f64, v as f64), [0.0, 0.0])
            } else {
                let dir = t_rel.rotation * k.ray(u as f64, v as f64);
                let p = dir * d + t_rel.translation;
                if p.z <= MIN_DEPTH {
                    continue;
                }
                let inv_z = 1.0 / p.z;
                let uv = PixelCoord::new(k.fx * p.x * inv_z + k.cx, k.fy * p.y * inv_z + k.cy);
                let du = k.fx * (dir.x * p.z - p.x * dir.z) * inv_z * inv_z;
                let dv = k.fy * (dir.y * p.z - p.y * dir.z) * inv_z * inv_z;
                (uv, [du, dv])
            };
            let Some(tap) = BilinearTap::new(w, h, uv.u, uv.v) else { continue };
            let mut g = [[0.0; 3]; 2];
            for c in 0..3 {
                pixels[i][c] = tap.blend(&channels[c]);
                let (gu, gv) = tap.derivatives(&channels[c]);
                g[0][c] = gu;
                g[1][c] = gv;
            }
            valid[i] = true;
            coords[i] = uv;
            coord_grad[i] = duv;
            image_grad[i] = g;
        }
    }
    Ok(WarpedView {
        image: ImageRgb::from_raw(w, h, pixels),
        valid: Mask::new(w, h, valid),
        coords,
        coord_grad,
        image_grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

/// A flow-warped scalar map with the taps used at each pixel (bilinear mode).
#[derive(Debug, Clone)]
pub struct FlowWarped {
    pub map: ScalarMap,
    pub taps: Vec<Option<BilinearTap>>,
}

/// `warped(p) = field(p + flow(p))`; out-of-bounds or invalid lookups are invalid.
pub fn flow_warp(field: &ScalarMap, flow: &FlowField, mode: Interpolation) -> Result<(ScalarMap, Mask)> {
    let warped = match mode {
        Interpolation::Bilinear => flow_warp_bilinear(field, flow)?.map,
        Interpolation::Nearest => flow_warp_nearest(field, flow)?,
    };
    let mask = Mask::new(warped.width, warped.height, warped.valid.clone());
    Ok((warped, mask))
}

pub fn flow_warp_bilinear(field: &ScalarMap, flow: &FlowField) -> Result<FlowWarped> {
    same_dims(field.dims(), flow.dims())?;
    let (w, h) = field.dims();
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    let mut taps = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = index(w, u, v);
            let [du, dv] = flow.get(u, v);
            if let Some(tap) = BilinearTap::new(w, h, u as f64 + du, v as f64 + dv) {
                if tap.idx.iter().all(|&j| field.valid[j]) {
                    values[i] = tap.blend(&field.values);
                    valid[i] = true;
                    taps[i] = Some(tap);
                }
            }
        }
    }
    Ok(FlowWarped { map: ScalarMap { width: w, height: h, values, valid }, taps })
}

fn nearest_index(w: usize, h: usize, u: f64, v: f64) -> Option<usize> {
    let (ur, vr) = (u.round(), v.round());
    if ur >= 0.0 && vr >= 0.0 && ur <= (w - 1) as f64 && vr <= (h - 1) as f64 {
        Some(index(w, ur as usize, vr as usize))
    } else {
        None
    }
}

fn flow_warp_nearest(field: &ScalarMap, flow: &FlowField) -> Result<ScalarMap> {
    same_dims(field.dims(), flow.dims())?;
    let (w, h) = field.dims();
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = index(w, u, v);
            let [du, dv] = flow.get(u, v);
            if let Some(j) = nearest_index(w, h, u as f64 + du, v as f64 + dv) {
                if field.valid[j] {
                    values[i] = field.values[j];
                    valid[i] = true;
                }
            }
        }
    }
    Ok(ScalarMap { width: w, height: h, values, valid })
}

/// Nearest-neighbour flow warp of a binary mask. Returns `(warped, in_bounds)`.
pub fn flow_warp_mask(mask: &Mask, flow: &FlowField) -> Result<(Mask, Mask)> {
    same_dims(mask.dims(), flow.dims())?;
    let (w, h) = mask.dims();
    let mut bits = vec![false; w * h];
    let mut ok = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = index(w, u, v);
            let [du, dv] = flow.get(u, v);
            if let Some(j) = nearest_index(w, h, u as f64 + du, v as f64 + dv) {
                bits[i] = mask.bits[j];
                ok[i] = true;
            }
        }
    }
    Ok((Mask::new(w, h, bits), Mask::new(w, h, ok)))
}
