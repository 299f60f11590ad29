//! Flow-guided shape constraint on pedestrian regions.

use super::inverse_depth::mean_normalized_inverse_depth;
use crate::error::Result;
use crate::losses::LossResult;
use crate::numeric::{pairwise_sum, sign};
use crate::raster::{same_dims, DepthField, FlowField, InstanceMask, Mask, ScalarMap};
use crate::sampling::{flow_warp_bilinear, flow_warp_mask};

/// Stabiliser added to the scale-invariant gradient denominator.
pub const SI_GRADIENT_EPS: f64 = 1e-7;

/// `M = M_t ∩ F(M_t')`: human pixels of the target whose nearest-neighbour
/// flow lookup lands in-bounds on a human pixel of the neighbour. Instance
/// identities are not matched.
pub fn overlap_mask(m_t: &InstanceMask, m_t_prime: &InstanceMask, flow: &FlowField) -> Result<Mask> {
    same_dims(m_t.dims(), m_t_prime.dims())?;
    let (warped, in_bounds) = flow_warp_mask(&m_t_prime.humans(), flow)?;
    Ok(m_t.humans().and(&warped).and(&in_bounds))
}

#[inline]
fn si_grad(a: f64, b: f64) -> f64 {
    (b - a) / (b.abs() + a.abs() + SI_GRADIENT_EPS)
}

/// `(d/da, d/db)` of `si_grad(a, b)`.
#[inline]
fn si_grad_partials(a: f64, b: f64) -> (f64, f64) {
    let s = b.abs() + a.abs() + SI_GRADIENT_EPS;
    let g = b - a;
    ((-s - g * sign(a)) / (s * s), (s - g * sign(b)) / (s * s))
}

/// Scale-invariant forward-difference gradient per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleInvariantGradient {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Whether the forward pair `(p, p+e)` exists and is valid.
    pub x_defined: Vec<bool>,
    pub y_defined: Vec<bool>,
}

/// `∇̄ d = ∇d / (|d + ∇d| + |d| + eps)` for x and y forward differences.
pub fn scale_invariant_gradient(d: &ScalarMap) -> ScaleInvariantGradient {
    let (w, h) = d.dims();
    let mut out = ScaleInvariantGradient {
        x: vec![0.0; w * h],
        y: vec![0.0; w * h],
        x_defined: vec![false; w * h],
        y_defined: vec![false; w * h],
    };
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if !d.valid[i] {
                continue;
            }
            if u + 1 < w && d.valid[i + 1] {
                out.x[i] = si_grad(d.values[i], d.values[i + 1]);
                out.x_defined[i] = true;
            }
            if v + 1 < h && d.valid[i + w] {
                out.y[i] = si_grad(d.values[i], d.values[i + w]);
                out.y_defined[i] = true;
            }
        }
    }
    out
}

/// Value and `d*`-space gradients of the flow-guided shape loss.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowShapeTerms {
    pub value: f64,
    pub grad_target: Vec<f64>,
    pub grad_neighbor: Vec<f64>,
    pub empty: bool,
}

/// Shape loss between the target `d*_t` and the bilinear flow-warp of the
/// neighbour `d*_t'`, averaged over `|M|`.
pub fn flow_shape_terms(
    dstar_t: &ScalarMap,
    dstar_t_prime: &ScalarMap,
    flow: &FlowField,
    overlap: &Mask,
) -> Result<FlowShapeTerms> {
    same_dims(dstar_t.dims(), dstar_t_prime.dims())?;
    same_dims(dstar_t.dims(), overlap.dims())?;
    let (w, h) = dstar_t.dims();
    let n = w * h;
    let m_count = overlap.count();
    if m_count == 0 {
        log::debug!("flow_shape_loss: empty overlap mask");
        return Ok(FlowShapeTerms {
            value: 0.0,
            grad_target: vec![0.0; n],
            grad_neighbor: vec![0.0; n],
            empty: true,
        });
    }
    let warped = flow_warp_bilinear(dstar_t_prime, flow)?;
    let wm = &warped.map;
    let inv_m = 1.0 / m_count as f64;
    let mut terms = Vec::new();
    let mut grad_t = vec![0.0; n];
    let mut grad_w = vec![0.0; n];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if !overlap.bits[i] {
                continue;
            }
            let neighbours = [(u + 1 < w).then_some(i + 1), (v + 1 < h).then_some(i + w)];
            for j in neighbours.into_iter().flatten() {
                let defined = dstar_t.valid[i] && dstar_t.valid[j] && wm.valid[i] && wm.valid[j];
                if !defined {
                    continue;
                }
                let (a, b) = (dstar_t.values[i], dstar_t.values[j]);
                let (wa, wb) = (wm.values[i], wm.values[j]);
                let r = si_grad(a, b) - si_grad(wa, wb);
                terms.push(r.abs());
                let s = sign(r) * inv_m;
                let (da, db) = si_grad_partials(a, b);
                grad_t[i] += s * da;
                grad_t[j] += s * db;
                let (dwa, dwb) = si_grad_partials(wa, wb);
                grad_w[i] -= s * dwa;
                grad_w[j] -= s * dwb;
            }
        }
    }
    let mut grad_tp = vec![0.0; n];
    for (i, tap) in warped.taps.iter().enumerate() {
        if let (Some(tap), true) = (tap, grad_w[i] != 0.0) {
            for (j, wgt) in tap.idx.iter().zip(tap.weights) {
                grad_tp[*j] += grad_w[i] * wgt;
            }
        }
    }
    Ok(FlowShapeTerms {
        value: pairwise_sum(&terms) * inv_m,
        grad_target: grad_t,
        grad_neighbor: grad_tp,
        empty: false,
    })
}

/// Depth-space flow shape loss: returns the target-frame result and the
/// gradient with respect to the neighbour depth.
pub fn flow_shape_loss(
    depth_t: &DepthField,
    depth_t_prime: &DepthField,
    flow: &FlowField,
    overlap: &Mask,
) -> Result<(LossResult, Vec<f64>)> {
    let nt = mean_normalized_inverse_depth(depth_t)?;
    let ntp = mean_normalized_inverse_depth(depth_t_prime)?;
    let terms = flow_shape_terms(&nt.map, &ntp.map, flow, overlap)?;
    if terms.empty {
        return Ok((LossResult::zero(depth_t.len()), vec![0.0; depth_t.len()]));
    }
    let g_t = nt.backprop(depth_t, &terms.grad_target);
    let g_tp = ntp.backprop(depth_t_prime, &terms.grad_neighbor);
    Ok((LossResult::new(terms.value, g_t), g_tp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::index;

    fn block_mask(w: usize, h: usize, u0: usize, v0: usize, size: usize) -> InstanceMask {
        let ids = (0..w * h)
            .map(|i| {
                let (u, v) = (i % w, i / w);
                (u >= u0 && u < u0 + size && v >= v0 && v < v0 + size) as u16
            })
            .collect();
        InstanceMask::new(w, h, ids).unwrap()
    }

    #[test]
    fn overlap_identity_and_disjoint() {
        let m = block_mask(8, 8, 2, 2, 3);
        let zero = FlowField::zeros(8, 8);
        assert_eq!(overlap_mask(&m, &m, &zero).unwrap(), m.humans());
        let other = block_mask(8, 8, 5, 5, 2);
        assert_eq!(overlap_mask(&m, &other, &zero).unwrap().count(), 0);
    }

    #[test]
    fn overlap_shifted_block_matches_pixel_loop() {
        let (w, h) = (12, 8);
        let m_tp = block_mask(w, h, 3, 2, 4);
        let shift = FlowField::constant(w, h, 2.0, 0.0);
        // target block moved left by two, plus a stray column the warp does not cover
        let m_t = {
            let mut ids = block_mask(w, h, 1, 2, 4).ids().to_vec();
            for v in 2..6 {
                ids[index(w, 5, v)] = 2;
            }
            InstanceMask::new(w, h, ids).unwrap()
        };
        let m = overlap_mask(&m_t, &m_tp, &shift).unwrap();
        for v in 0..h {
            for u in 0..w {
                let src = u + 2;
                let expected = m_t.get(u, v) > 0 && src < w && m_tp.get(src, v) > 0;
                assert_eq!(m.get(u, v), expected, "({u}, {v})");
            }
        }
        assert_eq!(m.count(), 16);
    }

    #[test]
    fn si_gradient_examples() {
        let c = ScalarMap::new(3, 2, vec![2.0; 6]);
        let g = scale_invariant_gradient(&c);
        assert!(g.x.iter().chain(&g.y).all(|x| *x == 0.0));

        let pair = ScalarMap::new(2, 1, vec![1.0, 3.0]);
        let g = scale_invariant_gradient(&pair);
        assert!((g.x[0] - 0.5).abs() < 1e-7);
        assert_eq!(g.x[1], 0.0);
        assert!(!g.x_defined[1]);
    }

    fn max_scale_deviation(magnitude: f64) -> f64 {
        let vals = [0.8, 1.3, 1.1, 0.6, 2.0, 0.9, 1.7, 1.2];
        let d = ScalarMap::new(4, 2, vals.iter().map(|x| x * magnitude).collect());
        let base = scale_invariant_gradient(&d);
        let mut worst = 0.0f64;
        for k in [0.5, 2.0, 10.0] {
            let scaled = ScalarMap::new(4, 2, d.values.iter().map(|x| x * k).collect());
            let g = scale_invariant_gradient(&scaled);
            for (a, b) in base.x.iter().zip(&g.x).chain(base.y.iter().zip(&g.y)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    #[test]
    fn si_gradient_is_scale_free() {
        // the stabiliser breaks homogeneity by O(eps / |d|)
        assert!(max_scale_deviation(100.0) < 1e-9);
        assert!(max_scale_deviation(1.0) < 1e-7);
    }

    #[test]
    fn exact_flow_alignment_is_zero() {
        let d_tp = ScalarMap::new(6, 1, vec![1.0, 1.2, 0.9, 1.4, 1.1, 0.8]);
        let d_t = ScalarMap::new(6, 1, vec![1.2, 0.9, 1.4, 1.1, 0.8, 1.0]);
        let flow = FlowField::constant(6, 1, 1.0, 0.0);
        let r = flow_shape_terms(&d_t, &d_tp, &flow, &Mask::full(6, 1)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn one_by_three_against_scalar_oracle() {
        let d_t = ScalarMap::new(3, 1, vec![1.0, 2.0, 1.0]);
        let warped = ScalarMap::new(3, 1, vec![1.0, 1.0, 1.0]);
        let r = flow_shape_terms(&d_t, &warped, &FlowField::zeros(3, 1), &Mask::full(3, 1)).unwrap();
        // scalar oracle: x terms at u=0,1; u=2 has no forward neighbour; no y terms
        let e = SI_GRADIENT_EPS;
        let g = |a: f64, b: f64| (b - a) / ((a + (b - a)).abs() + a.abs() + e);
        let oracle = ((g(1.0, 2.0) - g(1.0, 1.0)).abs() + (g(2.0, 1.0) - g(1.0, 1.0)).abs()) / 3.0;
        assert!((oracle - (1.0 / 3.0 + 1.0 / 3.0) / 3.0).abs() < 1e-7);
        assert!((r.value - oracle).abs() < 1e-15);
    }

    #[test]
    fn invariant_to_either_depth_scale() {
        let (w, h) = (6, 5);
        let dt: Vec<f64> = (0..w * h).map(|i| 2.0 + 0.3 * ((i * 7) % 5) as f64).collect();
        let dtp: Vec<f64> = (0..w * h).map(|i| 2.5 + 0.2 * ((i * 3) % 4) as f64).collect();
        let dt = DepthField::from_values(w, h, dt).unwrap();
        let dtp = DepthField::from_values(w, h, dtp).unwrap();
        let flow = FlowField::constant(w, h, 0.4, -0.3);
        let m = Mask::full(w, h);
        let base = flow_shape_loss(&dt, &dtp, &flow, &m).unwrap().0.value;
        assert!(base > 0.0);
        for c in [0.5, 2.0, 10.0] {
            let a = flow_shape_loss(&dt.scaled(c), &dtp, &flow, &m).unwrap().0.value;
            let b = flow_shape_loss(&dt, &dtp.scaled(c), &flow, &m).unwrap().0.value;
            assert!(((a - base) / base).abs() < 1e-9);
            assert!(((b - base) / base).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_overlap_flags() {
        let d = ScalarMap::new(2, 2, vec![1.0; 4]);
        let r = flow_shape_terms(&d, &d, &FlowField::zeros(2, 2), &Mask::empty(2, 2)).unwrap();
        assert!(r.empty);
        assert_eq!(r.value, 0.0);
    }
}
