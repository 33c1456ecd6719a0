use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_deg, Direction};

/// Equirectangular projection of a panorama.
///
/// Pixel `(x, y)` looks along azimuth `x * dphi + phi0` and elevation
/// `y * dtheta + theta0` in the camera frame. Steps may be negative, which
/// is how a top-row-first raster is described (`dtheta < 0`, `theta0 = 90`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErpParams {
    pub width: u32,
    pub height: u32,
    pub dphi: f64,
    pub dtheta: f64,
    pub phi0: f64,
    pub theta0: f64,
}

impl ErpParams {
    /// Full-sphere raster with row 0 at the zenith and column 0 at -180 deg.
    pub fn full_sphere(width: u32, height: u32) -> Self {
        Self { width, height, dphi: 360.0 / width as f64, dtheta: -180.0 / height as f64, phi0: -180.0, theta0: 90.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("ERP raster must be non-empty"));
        }
        if self.dphi == 0.0 || self.dtheta == 0.0 || !self.dphi.is_finite() || !self.dtheta.is_finite() {
            return Err(Error::invalid("ERP steps must be finite and non-zero"));
        }
        if self.width as f64 * self.dphi.abs() > 360.0 + 1e-6 {
            return Err(Error::invalid("ERP azimuth coverage exceeds 360 deg"));
        }
        if self.height as f64 * self.dtheta.abs() > 180.0 + 1e-6 {
            return Err(Error::invalid("ERP elevation coverage exceeds 180 deg"));
        }
        Ok(())
    }

    fn covers_full_circle(&self) -> bool {
        (self.width as f64 * self.dphi.abs() - 360.0).abs() < 1e-6
    }

    /// Nearest pixel looking along a camera-frame direction, if the raster
    /// covers it.
    pub fn camera_to_pixel(&self, d: Direction) -> Option<(u32, u32)> {
        let mut delta = d.azimuth - self.phi0;
        delta = if self.dphi > 0.0 { delta.rem_euclid(360.0) } else { -(-delta).rem_euclid(360.0) };
        let mut x = (delta / self.dphi).round();
        if x >= self.width as f64 && self.covers_full_circle() {
            x -= self.width as f64;
        }
        let y = ((d.elevation - self.theta0) / self.dtheta).round();
        let in_range = |v: f64, n: u32| v >= 0.0 && v < n as f64;
        (in_range(x, self.width) && in_range(y, self.height)).then_some((x as u32, y as u32))
    }
}

pub fn erp_pixel_to_camera(x: u32, y: u32, erp: &ErpParams) -> Result<Direction> {
    if x >= erp.width || y >= erp.height {
        return Err(Error::PixelOutOfBounds { x, y, width: erp.width, height: erp.height });
    }
    let azimuth = x as f64 * erp.dphi + erp.phi0;
    let elevation = y as f64 * erp.dtheta + erp.theta0;
    Ok(Direction::new(wrap_deg(azimuth), elevation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_pixel_maps_to_reference_angles() {
        let erp = ErpParams { width: 100, height: 50, dphi: 1.0, dtheta: 1.0, phi0: 12.0, theta0: -30.0 };
        let d = erp_pixel_to_camera(0, 0, &erp).unwrap();
        assert_eq!((d.azimuth, d.elevation), (12.0, -30.0));
    }

    #[test]
    fn square_panorama_arithmetic() {
        let erp = ErpParams {
            width: 3840,
            height: 3840,
            dphi: 360.0 / 3840.0,
            dtheta: 180.0 / 3840.0,
            phi0: -180.0,
            theta0: -90.0,
        };
        erp.validate().unwrap();
        let d = erp_pixel_to_camera(1920, 0, &erp).unwrap();
        assert!(d.azimuth.abs() < 1e-12);
        let d = erp_pixel_to_camera(0, 3839, &erp).unwrap();
        assert!((d.elevation - (90.0 - 180.0 / 3840.0)).abs() < 1e-9);
        assert!((d.elevation - 89.95).abs() < 0.01);
        assert!(matches!(erp_pixel_to_camera(3840, 0, &erp), Err(Error::PixelOutOfBounds { .. })));
    }

    #[test]
    fn inverse_lookup_round_trips_pixels() {
        let erp = ErpParams::full_sphere(720, 360);
        for &(x, y) in &[(0, 0), (359, 180), (719, 359), (1, 200)] {
            let d = erp_pixel_to_camera(x, y, &erp).unwrap();
            assert_eq!(erp.camera_to_pixel(d), Some((x, y)));
        }
        let partial = ErpParams { width: 10, height: 10, dphi: 1.0, dtheta: 1.0, phi0: 0.0, theta0: 0.0 };
        assert_eq!(partial.camera_to_pixel(Direction::new(50.0, 5.0)), None);
    }

    #[test]
    fn oversized_coverage_rejected() {
        let erp = ErpParams { width: 10, height: 10, dphi: 40.0, dtheta: 1.0, phi0: 0.0, theta0: 0.0 };
        assert!(erp.validate().is_err());
    }
}
