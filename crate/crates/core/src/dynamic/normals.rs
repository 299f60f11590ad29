//! Surface normals from depth via the 8-neighbour cross-product average.

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::Intrinsics;
use crate::raster::{same_dims, DepthField};

/// Per-pixel unit normals, oriented toward the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

// Perpendicular neighbour pairs, each turning the same way in the image:
// (E, S), (SE, SW), (W, N), (NW, NE).
const PAIRS: [((i64, i64), (i64, i64)); 4] = [
    ((1, 0), (0, 1)),
    ((1, 1), (-1, 1)),
    ((-1, 0), (0, -1)),
    ((-1, -1), (1, -1)),
];

pub fn surface_normals(depth: &DepthField, k: &Intrinsics) -> Result<NormalMap> {
    same_dims(depth.dims(), k.dims())?;
    let (w, h) = depth.dims();
    let mut normals = vec![Vector3::zeros(); w * h];
    let mut valid = vec![false; w * h];
    if w < 3 || h < 3 {
        return Ok(NormalMap { width: w, height: h, normals, valid });
    }
    let point = |u: usize, v: usize| -> Option<Vector3<f64>> {
        depth.get(u, v).map(|d| k.ray(u as f64, v as f64) * d)
    };
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            let Some(p) = point(u, v) else { continue };
            let mut sum = Vector3::zeros();
            let mut ok = true;
            for ((ai, aj), (bi, bj)) in PAIRS {
                let pa = point((u as i64 + ai) as usize, (v as i64 + aj) as usize);
                let pb = point((u as i64 + bi) as usize, (v as i64 + bj) as usize);
                let (Some(pa), Some(pb)) = (pa, pb) else {
                    ok = false;
                    break;
                };
                let c = (pa - p).cross(&(pb - p));
                let norm = c.norm();
                if !(norm > 0.0) {
                    ok = false;
                    break;
                }
                let mut n = c / norm;
                if n.dot(&p) > 0.0 {
                    n = -n;
                }
                sum += n;
            }
            let norm = sum.norm();
            if ok && norm > 0.0 {
                let i = v * w + u;
                normals[i] = sum / norm;
                valid[i] = true;
            }
        }
    }
    Ok(NormalMap { width: w, height: h, normals, valid })
}
