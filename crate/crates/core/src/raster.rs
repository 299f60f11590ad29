//! Dense per-pixel containers: depth, images, flow, masks.
//!
//! All rasters are row-major with index `v * width + u`, where `u` is the
//! column and `v` the row.

use crate::error::{check_dims, Error, Result};

#[inline]
pub fn index(width: usize, u: usize, v: usize) -> usize {
    v * width + u
}

/// Per-pixel metric depth with validity. Valid values are finite and > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthField {
    /// Builds a field; non-finite or non-positive values become invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "depth buffer has {} values for {}x{}",
                values.len(),
                width,
                height
            )));
        }
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self { width, height, values, valid })
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidArgument("depth buffer size mismatch".into()));
        }
        let valid = values
            .iter()
            .zip(valid)
            .map(|(d, ok)| ok && d.is_finite() && *d > 0.0)
            .collect();
        Ok(Self { width, height, values, valid })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self::from_values(width, height, vec![depth; width * height])
            .expect("constant field has the right size")
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![f64::NAN; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let i = index(self.width, u, v);
        self.valid[i].then_some(self.values[i])
    }
    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Multiplies every valid depth by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|d| d * factor).collect();
        Self { width: self.width, height: self.height, values, valid: self.valid.clone() }
    }

    /// Applies `f` to valid values; results that leave (0, inf) become invalid.
    pub fn map_valid(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.values.len() {
            if out.valid[i] {
                let d = f(i, out.values[i]);
                out.values[i] = d;
                out.valid[i] = d.is_finite() && d > 0.0;
            }
        }
        out
    }
}

/// Three-channel image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument("image buffer size mismatch".into()));
        }
        if pixels.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidArgument("image intensity outside [0, 1]".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant image")
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        self.pixels[index(self.width, u, v)]
    }

    /// Channel-mean intensity.
    pub fn gray(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Self {
        Self { width, height, pixels }
    }
}

/// Generic real-valued map with validity (inverse depth, warped maps, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "scalar map size");
        let valid = values.iter().map(|v| v.is_finite()).collect();
        Self { width, height, values, valid }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.values[index(self.width, u, v)]
    }
}

/// Dense 2-D displacement in pixels; `flow(p)` points from `p` in the target
/// frame to the corresponding location in the neighbouring frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(Error::InvalidArgument("flow buffer size mismatch".into()));
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("flow contains non-finite values".into()));
        }
        Ok(Self { width, height, vectors })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, vectors: vec![[0.0, 0.0]; width * height] }
    }

    pub fn constant(width: usize, height: usize, du: f64, dv: f64) -> Self {
        Self { width, height, vectors: vec![[du, dv]; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [f64; 2] {
        self.vectors[index(self.width, u, v)]
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask size");
        Self { width, height, bits }
    }
    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }
    pub fn full(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![true; width * height])
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[index(self.width, u, v)]
    }
    pub fn complement(&self) -> Self {
        Self::new(self.width, self.height, self.bits.iter().map(|b| !b).collect())
    }
    pub fn and(&self, other: &Mask) -> Self {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Self::new(self.width, self.height, bits)
    }
}

/// Per-pixel pedestrian instance ids: 0 is background, `k >= 1` is instance `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    ids: Vec<u16>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, ids: Vec<u16>) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::InvalidArgument("instance buffer size mismatch".into()));
        }
        Ok(Self { width, height, ids })
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, ids: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
    pub fn ids(&self) -> &[u16] {
        &self.ids
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.ids[index(self.width, u, v)]
    }

    /// The union of all instances (M_t).
    pub fn humans(&self) -> Mask {
        Mask::new(self.width, self.height, self.ids.iter().map(|&k| k > 0).collect())
    }

    /// Sorted, deduplicated non-zero instance ids present in the mask.
    pub fn instance_ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.ids.iter().copied().filter(|&k| k > 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Row-major pixel indices of instance `k`.
    pub fn pixels_of(&self, k: u16) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.ids[i] == k).collect()
    }
}

/// Sparse absolute-scale depth samples; the valid set is Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth {
    depth: DepthField,
}

impl SparseDepth {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { depth: DepthField::invalid(width, height) }
    }

    pub fn from_points(width: usize, height: usize, points: &[(usize, usize, f64)]) -> Result<Self> {
        let mut values = vec![f64::NAN; width * height];
        for &(u, v, d) in points {
            if u >= width || v >= height {
                return Err(Error::InvalidArgument(format!(
                    "sparse point ({u}, {v}) outside {width}x{height}"
                )));
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidArgument(format!("sparse depth {d} at ({u}, {v})")));
            }
            values[index(width, u, v)] = d;
        }
        Ok(Self { depth: DepthField::from_values(width, height, values)? })
    }

    pub fn from_field(depth: DepthField) -> Self {
        Self { depth }
    }

    pub fn field(&self) -> &DepthField {
        &self.depth
    }
    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }
    pub fn count(&self) -> usize {
        self.depth.valid_count()
    }

    /// `(u, v, depth)` triples in row-major order.
    pub fn points(&self) -> Vec<(usize, usize, f64)> {
        let w = self.depth.width();
        (0..self.depth.len())
            .filter(|&i| self.depth.is_valid(i))
            .map(|i| (i % w, i / w, self.depth.values()[i]))
            .collect()
    }
}

pub(crate) fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    check_dims(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_validity_follows_value() {
        let d = DepthField::from_values(2, 2, vec![1.0, 0.0, -1.0, f64::NAN]).unwrap();
        assert_eq!(d.valid(), &[true, false, false, false]);
        assert_eq!(d.valid_count(), 1);
    }

    #[test]
    fn image_rejects_out_of_range() {
        assert!(ImageRgb::new(1, 1, vec![[0.0, 1.2, 0.0]]).is_err());
    }

    #[test]
    fn instance_helpers() {
        let m = InstanceMask::new(3, 1, vec![0, 2, 1]).unwrap();
        assert_eq!(m.instance_ids(), vec![1, 2]);
        assert_eq!(m.humans().bits, vec![false, true, true]);
        assert_eq!(m.pixels_of(2), vec![1]);
    }

    #[test]
    fn sparse_points_round_trip() {
        let s = SparseDepth::from_points(4, 3, &[(1, 2, 3.0), (0, 0, 1.5)]).unwrap();
        assert_eq!(s.count(), 2);
        assert_eq!(s.points(), vec![(0, 0, 1.5), (1, 2, 3.0)]);
        assert!(SparseDepth::from_points(4, 3, &[(4, 0, 1.0)]).is_err());
    }
}
