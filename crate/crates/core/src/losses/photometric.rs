//! SSIM + L1 photometric consistency with minimum reprojection and auto-masking.

use super::ssim::SsimStats;
use super::LossResult;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, PoseSe3};
use crate::numeric::{pairwise_sum, sign};
use crate::raster::{same_dims, DepthField, ImageRgb, Mask};
use crate::sampling::warp_view;

/// Weight of the SSIM term against L1.
pub const PHOTOMETRIC_ALPHA: f64 = 0.85;

/// A neighbouring frame and the relative pose `T_{t->t'}` into it.
#[derive(Debug, Clone, Copy)]
pub struct PhotometricSource<'a> {
    pub image: &'a ImageRgb,
    pub pose: PoseSe3,
}

/// Per-pixel `alpha (1 - SSIM)/2 + (1 - alpha) |a - b|` (L1 averaged over channels).
fn pixel_errors(target: &ImageRgb, other: &ImageRgb, stats: &SsimStats, alpha: f64) -> Vec<f64> {
    target
        .pixels()
        .iter()
        .zip(other.pixels())
        .zip(&stats.mean)
        .map(|((a, b), s)| {
            let l1 = ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0;
            alpha * (1.0 - s) / 2.0 + (1.0 - alpha) * l1
        })
        .collect()
}

/// Photometric loss of the target frame against one or more warped sources.
///
/// The reduction is a mean over pixels that are valid in at least one source
/// and survive the auto-mask (warped error strictly below the unwarped one).
pub fn photometric_loss(
    target: &ImageRgb,
    sources: &[PhotometricSource<'_>],
    depth: &DepthField,
    k: &Intrinsics,
    alpha: f64,
) -> Result<LossResult> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("photometric loss needs at least one source".into()));
    }
    same_dims(k.dims(), target.dims())?;
    let n = target.pixels().len();

    let mut views = Vec::with_capacity(sources.len());
    let mut stats = Vec::with_capacity(sources.len());
    let mut warped_err = Vec::with_capacity(sources.len());
    let mut identity_min = vec![f64::INFINITY; n];
    for src in sources {
        same_dims(target.dims(), src.image.dims())?;
        let view = warp_view(src.image, depth, k, &src.pose)?;
        let st = SsimStats::compute(target, &view.image);
        warped_err.push(pixel_errors(target, &view.image, &st, alpha));
        let id_stats = SsimStats::compute(target, src.image);
        for (m, e) in identity_min.iter_mut().zip(pixel_errors(target, src.image, &id_stats, alpha)) {
            *m = m.min(e);
        }
        views.push(view);
        stats.push(st);
    }

    let mut best = vec![usize::MAX; n];
    let mut error_map = vec![f64::NAN; n];
    let mut kept = vec![false; n];
    for p in 0..n {
        for (s, view) in views.iter().enumerate() {
            if view.valid.bits[p] && (best[p] == usize::MAX || warped_err[s][p] < error_map[p]) {
                best[p] = s;
                error_map[p] = warped_err[s][p];
            }
        }
        kept[p] = best[p] != usize::MAX && error_map[p] < identity_min[p];
    }
    let kept_errors: Vec<f64> = (0..n).filter(|&p| kept[p]).map(|p| error_map[p]).collect();
    let (w, h) = target.dims();
    if kept_errors.is_empty() {
        log::debug!("photometric_loss: every pixel masked");
        let mut r = LossResult::zero(n);
        r.error_map = Some(error_map);
        r.kept = Some(Mask::new(w, h, kept));
        return Ok(r);
    }
    let count = kept_errors.len() as f64;
    let value = pairwise_sum(&kept_errors) / count;

    let mut grad = vec![0.0; n];
    for (s, view) in views.iter().enumerate() {
        let up: Vec<f64> =
            (0..n).map(|p| if kept[p] && best[p] == s { 1.0 / count } else { 0.0 }).collect();
        if up.iter().all(|u| *u == 0.0) {
            continue;
        }
        let ssim_up: Vec<f64> = up.iter().map(|u| -alpha / 2.0 * u).collect();
        let mut g_img = stats[s].backward_b(target, &view.image, &ssim_up);
        let (ta, tb) = (target.pixels(), view.image.pixels());
        for p in 0..n {
            if up[p] != 0.0 {
                for c in 0..3 {
                    g_img[p][c] += (1.0 - alpha) * up[p] / 3.0 * sign(tb[p][c] - ta[p][c]);
                }
            }
        }
        for j in 0..n {
            if !view.valid.bits[j] {
                continue;
            }
            let [du, dv] = view.coord_grad[j];
            let [gu, gv] = view.image_grad[j];
            let mut acc = 0.0;
            for c in 0..3 {
                acc += g_img[j][c] * (gu[c] * du + gv[c] * dv);
            }
            grad[j] += acc;
        }
    }

    Ok(LossResult {
        value,
        grad,
        error_map: Some(error_map),
        kept: Some(Mask::new(w, h, kept)),
        empty: false,
    })
}
