//! Ray-cast indoor scene: a textured box room with walking box pedestrians.
//!
//! World frame is y-down like the camera: the floor is `Y = 0` and the
//! ceiling sits at `Y = -room.height`.

use nalgebra::{Matrix3, Vector3};

use super::texture::TextureSpec;
use crate::error::{Error, Result};
use crate::geometry::{pitch_rotation, project, Intrinsics, Point3, PoseKind, PoseSe3};
use crate::raster::{DepthField, FlowField, ImageRgb, InstanceMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub height: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self { x_min: -4.0, x_max: 4.0, z_min: -2.0, z_max: 8.0, height: 3.0 }
    }
}

/// An axis-aligned box standing on the floor and translating each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianSpec {
    /// Footprint centre `(x, z)` at frame 0.
    pub start: [f64; 2],
    /// Footprint size `(x extent, z extent)`.
    pub footprint: [f64; 2],
    pub height: f64,
    /// World translation `(dx, dz)` per frame.
    pub velocity: [f64; 2],
}

impl PedestrianSpec {
    pub fn centre(&self, frame: usize) -> [f64; 2] {
        let t = frame as f64;
        [self.start[0] + t * self.velocity[0], self.start[1] + t * self.velocity[1]]
    }

    fn bounds(&self, frame: usize) -> (Vector3<f64>, Vector3<f64>) {
        let [cx, cz] = self.centre(frame);
        let [wx, wz] = self.footprint;
        (
            Vector3::new(cx - wx / 2.0, -self.height, cz - wz / 2.0),
            Vector3::new(cx + wx / 2.0, 0.0, cz + wz / 2.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub intrinsics: Intrinsics,
    pub room: RoomConfig,
    pub texture: TextureSpec,
    /// Camera centre at frame 0 (world, y-down: height 1.4 m is `y = -1.4`).
    pub camera_start: [f64; 3],
    /// Camera translation per frame.
    pub camera_step: [f64; 3],
    /// Upward tilt of the optical axis, degrees.
    pub pitch_deg: f64,
    /// Yaw change per frame, degrees.
    pub yaw_step_deg: f64,
    pub pedestrians: Vec<PedestrianSpec>,
    pub frames: usize,
    pub seed: u64,
    /// Colour samples per pixel side (box-filtered anti-aliasing).
    pub supersample: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            intrinsics: Intrinsics { fx: 36.0, fy: 36.0, cx: 31.5, cy: 23.5, width: 64, height: 48 },
            room: RoomConfig::default(),
            texture: TextureSpec::default(),
            camera_start: [0.0, -1.4, 0.0],
            camera_step: [0.06, 0.0, 0.12],
            pitch_deg: 10.0,
            yaw_step_deg: 0.0,
            pedestrians: vec![
                PedestrianSpec { start: [-0.9, 3.4], footprint: [0.6, 0.4], height: 1.7, velocity: [0.1, 0.0] },
                PedestrianSpec { start: [1.1, 4.4], footprint: [0.6, 0.4], height: 1.7, velocity: [-0.08, -0.05] },
            ],
            frames: 3,
            seed: 0,
            supersample: 3,
        }
    }
}

/// What a camera ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Ceiling,
    /// Walls in order `x_min, x_max, z_min, z_max`.
    Wall(u8),
    /// Zero-based pedestrian index.
    Pedestrian(u16),
}

impl Surface {
    fn texture_id(self) -> u64 {
        match self {
            Surface::Floor => 1,
            Surface::Ceiling => 2,
            Surface::Wall(i) => 3 + u64::from(i),
            Surface::Pedestrian(k) => 100 + u64::from(k),
        }
    }

    fn tint(self) -> [f64; 3] {
        match self {
            Surface::Floor => [0.9, 0.75, 0.6],
            Surface::Ceiling => [0.8, 0.8, 0.85],
            Surface::Wall(i) => [[0.6, 0.8, 0.9], [0.7, 0.9, 0.6], [0.9, 0.7, 0.8], [0.75, 0.75, 0.95]][usize::from(i % 4)],
            Surface::Pedestrian(k) => [[0.95, 0.4, 0.3], [0.3, 0.5, 0.95]][usize::from(k % 2)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub surface: Surface,
    /// World point.
    pub point: Point3,
    /// Camera-frame z (the depth).
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub image: ImageRgb,
    pub depth: DepthField,
    pub instances: InstanceMask,
    /// Camera-to-world pose.
    pub pose: PoseSe3,
    pub hits: Vec<Hit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub frames: Vec<SyntheticFrame>,
}

impl SceneConfig {
    /// The default scene rendered at another resolution with the same field of view.
    pub fn with_resolution(width: usize, height: usize) -> Self {
        let base = Self::default();
        let k = base.intrinsics;
        let s = width as f64 / k.width as f64;
        let intrinsics = Intrinsics {
            fx: k.fx * s,
            fy: k.fy * s,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        };
        Self { intrinsics, ..base }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let r = &self.room;
        if !(r.x_min < r.x_max && r.z_min < r.z_max && r.height > 0.0) {
            return Err(Error::DegenerateGeometry(format!("room {r:?}")));
        }
        if !(self.texture.cell > 0.0) {
            return Err(Error::InvalidArgument("texture cell must be positive".into()));
        }
        for p in &self.pedestrians {
            if !(p.footprint[0] > 0.0 && p.footprint[1] > 0.0 && p.height > 0.0) {
                return Err(Error::DegenerateGeometry(format!("pedestrian {p:?}")));
            }
        }
        for t in 0..self.frames {
            let c = self.camera_pose(t).translation;
            let inside = c.x > r.x_min && c.x < r.x_max && c.z > r.z_min && c.z < r.z_max && c.y < 0.0 && c.y > -r.height;
            if !inside {
                return Err(Error::DegenerateGeometry(format!("camera at frame {t} is outside the room")));
            }
            for (k, p) in self.pedestrians.iter().enumerate() {
                let (lo, hi) = p.bounds(t);
                if (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]) {
                    return Err(Error::DegenerateGeometry(format!("camera inside pedestrian {k} at frame {t}")));
                }
            }
        }
        Ok(())
    }

    pub fn camera_pose(&self, frame: usize) -> PoseSe3 {
        let t = frame as f64;
        let c = Vector3::from(self.camera_start) + t * Vector3::from(self.camera_step);
        let yaw = (t * self.yaw_step_deg).to_radians();
        let r = Matrix3::new(yaw.cos(), 0.0, yaw.sin(), 0.0, 1.0, 0.0, -yaw.sin(), 0.0, yaw.cos())
            * pitch_rotation(self.pitch_deg.to_radians());
        PoseSe3 { rotation: r, translation: c, kind: PoseKind::CameraToWorld }
    }
}

/// Slab test; entry distance along `dir` when the box is ahead of `origin`.
fn ray_box(origin: &Point3, dir: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
            continue;
        }
        let t0 = (lo[a] - origin[a]) / dir[a];
        let t1 = (hi[a] - origin[a]) / dir[a];
        let (near, far) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        t_enter = t_enter.max(near);
        t_exit = t_exit.min(far);
    }
    (t_enter <= t_exit && t_enter > 0.0).then_some(t_enter)
}

/// Casts one ray; `dir` is scaled so its camera-frame z component is 1, making
/// the ray parameter equal to the depth.
fn cast(cfg: &SceneConfig, frame: usize, origin: &Point3, dir: &Vector3<f64>) -> Option<Hit> {
    let r = &cfg.room;
    let planes = [
        (0, r.x_min, Surface::Wall(0)),
        (0, r.x_max, Surface::Wall(1)),
        (2, r.z_min, Surface::Wall(2)),
        (2, r.z_max, Surface::Wall(3)),
    ];
    let mut best: Option<(f64, Surface)> = None;
    let mut consider = |t: f64, s: Surface| {
        if t > 0.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, s));
        }
    };
    if dir.y > 0.0 {
        consider(-origin.y / dir.y, Surface::Floor);
    } else if dir.y < 0.0 {
        consider((-r.height - origin.y) / dir.y, Surface::Ceiling);
    }
    for (a, value, s) in planes {
        if dir[a] != 0.0 {
            let t = (value - origin[a]) / dir[a];
            // only the wall we are heading towards
            if (dir[a] > 0.0) == (value > origin[a]) {
                consider(t, s);
            }
        }
    }
    for (k, p) in cfg.pedestrians.iter().enumerate() {
        let (lo, hi) = p.bounds(frame);
        if let Some(t) = ray_box(origin, dir, &lo, &hi) {
            consider(t, Surface::Pedestrian(k as u16));
        }
    }
    best.map(|(t, surface)| Hit { surface, point: origin + dir * t, depth: t })
}

fn texture_coords(cfg: &SceneConfig, frame: usize, hit: &Hit) -> (f64, f64) {
    let p = hit.point;
    match hit.surface {
        Surface::Floor | Surface::Ceiling => (p.x, p.z),
        Surface::Wall(0) | Surface::Wall(1) => (p.z, p.y),
        Surface::Wall(_) => (p.x, p.y),
        Surface::Pedestrian(k) => {
            // body-fixed coordinates, so the texture travels with the pedestrian
            let [cx, cz] = cfg.pedestrians[usize::from(k)].centre(frame);
            ((p.x - cx) + (p.z - cz), p.y)
        }
    }
}

fn shade(cfg: &SceneConfig, frame: usize, hit: &Hit) -> [f64; 3] {
    let (a, b) = texture_coords(cfg, frame, hit);
    let id = hit.surface.texture_id();
    let g = cfg.texture.intensity(cfg.seed, id, a, b);
    let g2 = cfg.texture.intensity(cfg.seed, id + 50, a, b);
    let tint = hit.surface.tint();
    [
        (g * tint[0] + 0.5 * (1.0 - tint[0])).clamp(0.0, 1.0),
        (0.5 * (g + g2) * tint[1] + 0.5 * (1.0 - tint[1])).clamp(0.0, 1.0),
        (g2 * tint[2] + 0.5 * (1.0 - tint[2])).clamp(0.0, 1.0),
    ]
}

/// Ray-casts every pixel from `pose` with the scene as it is at `frame`.
pub fn render(cfg: &SceneConfig, frame: usize, pose: &PoseSe3) -> Result<SyntheticFrame> {
    let k = &cfg.intrinsics;
    let (w, h) = k.dims();
    let origin = pose.translation;
    let mut hits = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let dir = pose.rotation * k.ray(u as f64, v as f64);
            let hit = cast(cfg, frame, &origin, &dir)
                .ok_or_else(|| Error::DegenerateGeometry(format!("ray ({u}, {v}) escapes the room")))?;
            hits.push(hit);
        }
    }
    let n = cfg.supersample.max(1);
    let mut pixels = Vec::with_capacity(w * h);
    for (i, hit) in hits.iter().enumerate() {
        if n == 1 {
            pixels.push(shade(cfg, frame, hit));
            continue;
        }
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        let mut acc = [0.0; 3];
        for sy in 0..n {
            for sx in 0..n {
                let du = (sx as f64 + 0.5) / n as f64 - 0.5;
                let dv = (sy as f64 + 0.5) / n as f64 - 0.5;
                let dir = pose.rotation * k.ray(u + du, v + dv);
                let sub = cast(cfg, frame, &origin, &dir).unwrap_or(*hit);
                let c = shade(cfg, frame, &sub);
                for ch in 0..3 {
                    acc[ch] += c[ch];
                }
            }
        }
        pixels.push(acc.map(|c| (c / (n * n) as f64).clamp(0.0, 1.0)));
    }
    let depth = DepthField::from_values(w, h, hits.iter().map(|h| h.depth).collect())?;
    let ids = hits
        .iter()
        .map(|h| match h.surface {
            Surface::Pedestrian(k) => k + 1,
            _ => 0,
        })
        .collect();
    Ok(SyntheticFrame {
        image: ImageRgb::new(w, h, pixels)?,
        depth,
        instances: InstanceMask::new(w, h, ids)?,
        pose: *pose,
        hits,
    })
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let frames = (0..cfg.frames).map(|t| render(cfg, t, &cfg.camera_pose(t))).collect::<Result<Vec<_>>>()?;
    Ok(Scene { config: cfg.clone(), frames })
}

impl Scene {
    pub fn intrinsics(&self) -> &Intrinsics {
        &self.config.intrinsics
    }

    /// Ground-truth flow `F_{t'->t}` on frame `t`'s grid: each target pixel maps
    /// to where its surface point (moved with its pedestrian, if any) projects
    /// in frame `t'`.
    pub fn flow(&self, t: usize, t_prime: usize) -> Result<FlowField> {
        let (src, dst) = (&self.frames[t], &self.frames[t_prime]);
        let k = self.intrinsics();
        let (w, _) = k.dims();
        let to_cam = dst.pose.inverse();
        let vectors = src
            .hits
            .iter()
            .enumerate()
            .map(|(i, hit)| {
                let mut x = hit.point;
                if let Surface::Pedestrian(p) = hit.surface {
                    let spec = &self.config.pedestrians[usize::from(p)];
                    let (a, b) = (spec.centre(t), spec.centre(t_prime));
                    x += Vector3::new(b[0] - a[0], 0.0, b[1] - a[1]);
                }
                let q = project(&to_cam.transform(&x), k)?;
                Ok([q.u - (i % w) as f64, q.v - (i / w) as f64])
            })
            .collect::<Result<Vec<_>>>()?;
        FlowField::new(k.width, k.height, vectors)
    }

    /// Pixels whose ray hits the floor.
    pub fn floor_mask(&self, t: usize) -> Vec<bool> {
        self.frames[t].hits.iter().map(|h| h.surface == Surface::Floor).collect()
    }
}
