//! Rotation noise for the orientation-robustness study.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::PoseSe3;

/// Right-multiplies the rotation by a rotation of exactly `angle_deg` about a
/// seeded uniformly random axis; translation is unchanged.
pub fn perturb_pose(pose: &PoseSe3, angle_deg: f64, seed: u64) -> Result<PoseSe3> {
    if !(angle_deg >= 0.0 && angle_deg.is_finite()) {
        return Err(Error::InvalidArgument(format!("perturbation angle {angle_deg}")));
    }
    if angle_deg == 0.0 {
        return Ok(*pose);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
    let axis = Unit::new_normalize(Vector3::from(axis));
    let noise = Rotation3::from_axis_angle(&axis, angle_deg.to_radians());
    Ok(PoseSe3 { rotation: pose.rotation * noise.matrix(), ..*pose })
}
