//! Seeded value noise for procedural surface textures.

use crate::numeric::mix_seed;

fn lattice(seed: u64, surface: u64, ix: i64, iy: i64) -> f64 {
    let h = mix_seed(&[seed, surface, ix as u64, iy as u64]);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated lattice noise in `[0, 1]` at surface coordinates `(a, b)` (metres).
pub fn value_noise(seed: u64, surface: u64, a: f64, b: f64, cell: f64) -> f64 {
    let (x, y) = (a / cell, b / cell);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (smooth(x - x0), smooth(y - y0));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = lattice(seed, surface, ix, iy);
    let v10 = lattice(seed, surface, ix + 1, iy);
    let v01 = lattice(seed, surface, ix, iy + 1);
    let v11 = lattice(seed, surface, ix + 1, iy + 1);
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    top + (bottom - top) * fy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    /// Lattice spacing of the coarsest octave, metres.
    pub cell: f64,
    pub octaves: u32,
    /// Peak-to-peak intensity swing around mid-grey.
    pub amplitude: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self { cell: 0.5, octaves: 2, amplitude: 0.5 }
    }
}

impl TextureSpec {
    /// Grey level in `[0.5 - amplitude/2, 0.5 + amplitude/2]`.
    pub fn intensity(&self, seed: u64, surface: u64, a: f64, b: f64) -> f64 {
        let mut sum = 0.0;
        let mut weight = 1.0;
        let mut norm = 0.0;
        let mut cell = self.cell;
        for o in 0..self.octaves.max(1) {
            sum += weight * value_noise(seed, surface * 16 + u64::from(o), a, b, cell);
            norm += weight;
            weight *= 0.5;
            cell *= 0.5;
        }
        0.5 + self.amplitude * (sum / norm - 0.5)
    }
}
