//! Local east-north-up frame primitives.
//!
//! Azimuth is measured counterclockwise from +x (east) and lies in
//! [-180, 180). Elevation is measured from the horizontal plane and lies in
//! [-90, 90]. All angles exposed by this crate are in degrees.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wrap an angle in degrees into [-180, 180).
pub fn wrap_deg(angle: f64) -> f64 {
    let w = (angle + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Direction of this vector seen from the origin.
    pub fn direction(self) -> Direction {
        let horiz = self.x.hypot(self.y);
        Direction::new(self.y.atan2(self.x).to_degrees(), self.z.atan2(horiz).to_degrees())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction on the unit sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into [-180, 180) and clamping
    /// elevation into [-90, 90].
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth: wrap_deg(azimuth), elevation: elevation.clamp(-90.0, 90.0) }
    }

    pub fn unit_vector(self) -> Vec3 {
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        let (se, ce) = self.elevation.to_radians().sin_cos();
        Vec3::new(ce * ca, ce * sa, se)
    }

    pub fn from_unit_vector(v: Vec3) -> Self {
        v.direction()
    }

    /// Great-circle distance in radians.
    pub fn angular_distance(self, other: Direction) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        // atan2 form stays accurate for both tiny and near-antipodal angles
        a.cross(b).norm().atan2(a.dot(b))
    }

    pub fn opposite(self) -> Direction {
        Direction::new(self.azimuth + 180.0, -self.elevation)
    }
}
