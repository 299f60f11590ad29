//! Pinhole camera model and rigid transforms.
//!
//! Camera frame: +x right, +y down, +z forward. Pixel `(u, v)` has `u` along
//! columns and `v` along rows; integer coordinates are pixel centres.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

/// Tolerance used to accept a rotation matrix as orthonormal.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Warped points closer than this are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Sub-pixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Camera-frame 3-D point in meters.
pub type Point3 = Vector3<f64>;

/// Pinhole intrinsics with the image size they belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Direction `K^{-1} p~` with unit z.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Point3 {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Lifts pixel `p` at metric `depth` into the camera frame (`D * K^{-1} p~`).
pub fn backproject(p: PixelCoord, depth: f64, k: &Intrinsics) -> Result<Point3> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::InvalidArgument(format!("depth must be positive, got {depth}")));
    }
    Ok(k.ray(p.u, p.v) * depth)
}

/// Perspective projection `pi(K P)`.
pub fn project(point: &Point3, k: &Intrinsics) -> Result<PixelCoord> {
    if !(point.z > 0.0) {
        return Err(Error::BehindCamera { z: point.z });
    }
    Ok(PixelCoord {
        u: k.fx * point.x / point.z + k.cx,
        v: k.fy * point.y / point.z + k.cy,
    })
}

/// How a pose should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseKind {
    /// Maps camera-frame points into the world frame.
    CameraToWorld,
    /// Maps points of one camera frame into another.
    Relative,
}

/// Rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSe3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub kind: PoseKind,
}

impl PoseSe3 {
    pub fn identity(kind: PoseKind) -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), kind }
    }

    /// Checked constructor; the rotation must be orthonormal with det +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, kind: PoseKind) -> Result<Self> {
        let pose = Self { rotation, translation, kind };
        pose.validate(ROTATION_TOLERANCE)?;
        Ok(pose)
    }

    pub fn camera_to_world(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(rotation, translation, PoseKind::CameraToWorld)
    }

    /// Largest deviation of `R^T R` from identity, and of det(R) from 1.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let gram_err = gram.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        gram_err.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn validate(&self, tolerance: f64) -> Result<()> {
        if self.rotation.iter().chain(self.translation.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let err = self.orthonormality_error();
        if err > tolerance {
            return Err(Error::InvalidPose(format!(
                "rotation not orthonormal (error {err:.3e} > {tolerance:.1e})"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn transform(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation), kind: self.kind }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &PoseSe3) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            kind: PoseKind::Relative,
        }
    }

    /// Exact identity test (no tolerance).
    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>, kind: PoseKind, tolerance: f64) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidPose(format!("bottom row {bottom:?} is not 0 0 0 1")));
        }
        let pose = Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
            kind,
        };
        pose.validate(tolerance)?;
        Ok(pose)
    }

    /// Geodesic angle between two rotations, in radians.
    pub fn rotation_angle_to(&self, other: &PoseSe3) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

/// Angle of a rotation matrix, computed with atan2 for accuracy near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let s = 0.5 * axis.norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// `T_{t -> t'}` from two camera-to-world poses: maps frame-t points into frame t'.
pub fn relative_pose(pose_t: &PoseSe3, pose_t_prime: &PoseSe3) -> Result<PoseSe3> {
    for p in [pose_t, pose_t_prime] {
        p.validate(ROTATION_TOLERANCE)?;
        if p.kind != PoseKind::CameraToWorld {
            return Err(Error::InvalidPose("relative_pose expects camera-to-world poses".into()));
        }
    }
    let mut rel = pose_t_prime.inverse().compose(pose_t);
    rel.kind = PoseKind::Relative;
    Ok(rel)
}

/// Rotation about the camera x axis; positive `pitch` tilts the optical axis up (toward -y).
pub fn pitch_rotation(pitch_rad: f64) -> Matrix3<f64> {
    let (s, c) = pitch_rad.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}
