//! Local SSIM over a 3x3 box window with replicate padding.

use crate::error::Result;
use crate::raster::{same_dims, ImageRgb};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

const WINDOW_WEIGHT: f64 = 1.0 / 9.0;

/// Per-pixel, channel-averaged SSIM in [-1, 1].
pub fn ssim_map(a: &ImageRgb, b: &ImageRgb) -> Result<Vec<f64>> {
    same_dims(a.dims(), b.dims())?;
    Ok(SsimStats::compute(a, b).mean.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect())
}

/// The 9 replicate-padded window indices of pixel `(u, v)`.
#[inline]
pub(crate) fn window(w: usize, h: usize, u: usize, v: usize) -> [usize; 9] {
    let us = [u.saturating_sub(1), u, (u + 1).min(w - 1)];
    let vs = [v.saturating_sub(1), v, (v + 1).min(h - 1)];
    let mut out = [0; 9];
    let mut k = 0;
    for vv in vs {
        for uu in us {
            out[k] = vv * w + uu;
            k += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct Local {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

impl Local {
    fn ssim(&self) -> f64 {
        let a1 = 2.0 * self.mu_a * self.mu_b + SSIM_C1;
        let a2 = 2.0 * self.cov + SSIM_C2;
        let b1 = self.mu_a * self.mu_a + self.mu_b * self.mu_b + SSIM_C1;
        let b2 = self.var_a + self.var_b + SSIM_C2;
        (a1 * a2) / (b1 * b2)
    }

    /// Partials of SSIM with respect to `(mu_b, var_b, cov)`.
    fn partials(&self) -> (f64, f64, f64) {
        let a1 = 2.0 * self.mu_a * self.mu_b + SSIM_C1;
        let a2 = 2.0 * self.cov + SSIM_C2;
        let b1 = self.mu_a * self.mu_a + self.mu_b * self.mu_b + SSIM_C1;
        let b2 = self.var_a + self.var_b + SSIM_C2;
        let s = (a1 * a2) / (b1 * b2);
        let d_mu_b = 2.0 * self.mu_a * a2 / (b1 * b2) - s * 2.0 * self.mu_b / b1;
        let d_var_b = -s / b2;
        let d_cov = 2.0 * a1 / (b1 * b2);
        (d_mu_b, d_var_b, d_cov)
    }
}

/// Window statistics of an image pair, kept for the backward pass.
pub(crate) struct SsimStats {
    width: usize,
    height: usize,
    local: Vec<[Local; 3]>,
    /// Channel-averaged SSIM (unclamped).
    pub mean: Vec<f64>,
}

impl SsimStats {
    pub fn compute(a: &ImageRgb, b: &ImageRgb) -> Self {
        let (w, h) = a.dims();
        let (pa, pb) = (a.pixels(), b.pixels());
        let mut local = vec![[Local::default(); 3]; w * h];
        let mut mean = vec![0.0; w * h];
        for v in 0..h {
            for u in 0..w {
                let i = v * w + u;
                let win = window(w, h, u, v);
                let mut s = 0.0;
                for c in 0..3 {
                    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for &j in &win {
                        let (x, y) = (pa[j][c], pb[j][c]);
                        sa += x;
                        sb += y;
                        saa += x * x;
                        sbb += y * y;
                        sab += x * y;
                    }
                    let mu_a = sa * WINDOW_WEIGHT;
                    let mu_b = sb * WINDOW_WEIGHT;
                    let l = Local {
                        mu_a,
                        mu_b,
                        var_a: saa * WINDOW_WEIGHT - mu_a * mu_a,
                        var_b: sbb * WINDOW_WEIGHT - mu_b * mu_b,
                        cov: sab * WINDOW_WEIGHT - mu_a * mu_b,
                    };
                    s += l.ssim();
                    local[i][c] = l;
                }
                mean[i] = s / 3.0;
            }
        }
        Self { width: w, height: h, local, mean }
    }

    /// Given `upstream[p] = dL / d mean_ssim(p)`, returns `dL / d b` per pixel and channel.
    pub fn backward_b(&self, a: &ImageRgb, b: &ImageRgb, upstream: &[f64]) -> Vec<[f64; 3]> {
        let (w, h) = (self.width, self.height);
        let (pa, pb) = (a.pixels(), b.pixels());
        let mut grad = vec![[0.0; 3]; w * h];
        for v in 0..h {
            for u in 0..w {
                let i = v * w + u;
                let up = upstream[i];
                if up == 0.0 {
                    continue;
                }
                let win = window(w, h, u, v);
                for c in 0..3 {
                    let l = &self.local[i][c];
                    let (d_mu, d_var, d_cov) = l.partials();
                    let scale = up / 3.0 * WINDOW_WEIGHT;
                    for &j in &win {
                        let dj = d_mu
                            + d_var * 2.0 * (pb[j][c] - l.mu_b)
                            + d_cov * (pa[j][c] - l.mu_a);
                        grad[j][c] += scale * dj;
                    }
                }
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageRgb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageRgb::new(w, h, (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect())
            .unwrap()
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let a = random_image(9, 7, 1);
        assert!(ssim_map(&a, &a).unwrap().iter().all(|s| *s == 1.0));
    }

    #[test]
    fn constant_black_vs_white() {
        let a = ImageRgb::filled(4, 4, [0.0; 3]);
        let b = ImageRgb::filled(4, 4, [1.0; 3]);
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((expected - 9.999e-5).abs() < 1e-8);
        for s in ssim_map(&a, &b).unwrap() {
            assert!((s - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_and_bounded() {
        for seed in 0..5 {
            let a = random_image(8, 6, seed);
            let b = random_image(8, 6, seed + 100);
            let ab = ssim_map(&a, &b).unwrap();
            let ba = ssim_map(&b, &a).unwrap();
            for (x, y) in ab.iter().zip(&ba) {
                assert!((x - y).abs() < 1e-12);
                assert!((-1.0..=1.0).contains(x));
            }
        }
    }

    #[test]
    fn replicate_window_at_corner() {
        assert_eq!(window(3, 3, 0, 0), [0, 0, 1, 0, 0, 1, 3, 3, 4]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let a = random_image(5, 4, 7);
        let b = random_image(5, 4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let up: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |img: &ImageRgb| -> f64 {
            SsimStats::compute(&a, img).mean.iter().zip(&up).map(|(s, u)| s * u).sum()
        };
        let stats = SsimStats::compute(&a, &b);
        let grad = stats.backward_b(&a, &b, &up);
        let eps = 1e-6;
        for j in 0..20 {
            for c in 0..3 {
                let mut plus = b.pixels().to_vec();
                let mut minus = b.pixels().to_vec();
                plus[j][c] += eps;
                minus[j][c] -= eps;
                let fd = (objective(&ImageRgb::from_raw(5, 4, plus))
                    - objective(&ImageRgb::from_raw(5, 4, minus)))
                    / (2.0 * eps);
                assert!((fd - grad[j][c]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} vs {}", grad[j][c]);
            }
        }
    }
}
