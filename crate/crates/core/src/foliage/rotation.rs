use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_deg, Direction};

/// Camera-to-world z-y-z rotation, in degrees.
///
/// Applied as a rotation of `alpha_z1` about z, then `alpha_y` about y, then
/// `alpha_z2` about z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseRotation {
    pub alpha_z1: f64,
    pub alpha_y: f64,
    pub alpha_z2: f64,
}

impl PoseRotation {
    pub fn new(alpha_z1: f64, alpha_y: f64, alpha_z2: f64) -> Self {
        Self { alpha_z1: wrap_deg(alpha_z1), alpha_y: wrap_deg(alpha_y), alpha_z2: wrap_deg(alpha_z2) }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// The triple that undoes this rotation.
    pub fn inverse(self) -> Self {
        Self::new(-self.alpha_z2, -self.alpha_y, -self.alpha_z1)
    }

    /// Same rotation as a matrix acting on ENU column vectors.
    pub fn matrix(self) -> Matrix3<f64> {
        rot_z(self.alpha_z2) * rot_y(self.alpha_y) * rot_z(self.alpha_z1)
    }

    pub fn rotate_vector(self, v: Vector3<f64>) -> Vector3<f64> {
        self.matrix() * v
    }
}

pub(crate) fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub(crate) fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rotate_z(alpha: f64, d: (f64, f64)) -> (f64, f64) {
    (d.0 + alpha, d.1)
}

/// Rotation about y in angle space; inputs and outputs in radians.
fn rotate_y(alpha: f64, (phi, theta): (f64, f64)) -> (f64, f64) {
    let (sa, ca) = alpha.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let az = (ct * sp).atan2(ca * ct * cp + sa * st);
    let el = (-sa * ct * cp + ca * st).clamp(-1.0, 1.0).asin();
    (az, el)
}

/// Applies the z-y-z pose rotation to a direction.
pub fn rotate_zyz(pose: PoseRotation, d: Direction) -> Direction {
    let start = (d.azimuth.to_radians(), d.elevation.to_radians());
    let step1 = rotate_z(pose.alpha_z1.to_radians(), start);
    let step2 = rotate_y(pose.alpha_y.to_radians(), step1);
    let (az, el) = rotate_z(pose.alpha_z2.to_radians(), step2);
    Direction::new(az.to_degrees(), el.to_degrees())
}
