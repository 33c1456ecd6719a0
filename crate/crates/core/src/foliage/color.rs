use image::RgbImage;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Reference highlight color painted over rough foliage areas.
pub const DEFAULT_REF_COLOR: Rgb = [63, 71, 204];
pub const DEFAULT_PREFILTER_THRESHOLD: f64 = 50.0;

/// Red-mean weighted Euclidean color distance.
pub fn color_difference(c1: Rgb, c2: Rgb) -> f64 {
    color_difference_f64([c1[0] as f64, c1[1] as f64, c1[2] as f64], [c2[0] as f64, c2[1] as f64, c2[2] as f64])
}

fn color_difference_f64(c1: [f64; 3], c2: [f64; 3]) -> f64 {
    let r_mean = (c1[0] + c2[0]) / 2.0;
    let dr = c1[0] - c2[0];
    let dg = c1[1] - c2[1];
    let db = c1[2] - c2[2];
    ((2.0 + r_mean / 256.0) * dr * dr + 4.0 * dg * dg + (2.0 + (255.0 - r_mean) / 256.0) * db * db).sqrt()
}

/// Same metric for real-valued components, which must lie in [0, 255].
pub fn try_color_difference(c1: [f64; 3], c2: [f64; 3]) -> Result<f64> {
    if let Some(&bad) = c1.iter().chain(&c2).find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::ColorOutOfRange(bad));
    }
    Ok(color_difference_f64(c1, c2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefilterConfig {
    pub ref_color: Rgb,
    pub threshold: f64,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self { ref_color: DEFAULT_REF_COLOR, threshold: DEFAULT_PREFILTER_THRESHOLD }
    }
}

/// Pixels whose color is strictly closer than `threshold` to `ref_color`,
/// in row-major order.
pub fn prefilter_foliage(image: &RgbImage, cfg: &PrefilterConfig) -> Vec<(u32, u32)> {
    image
        .enumerate_pixels()
        .filter(|(_, _, p)| color_difference(p.0, cfg.ref_color) < cfg.threshold)
        .map(|(x, y, _)| (x, y))
        .collect()
}
