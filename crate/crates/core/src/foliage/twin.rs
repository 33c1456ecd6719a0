//! World-frame angular foliage mask built from an annotated panorama.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, RgbImage};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::color::{prefilter_foliage, PrefilterConfig};
use super::erp::{erp_pixel_to_camera, ErpParams};
use super::knn::{knn_classify, LabeledPixels, PixelClass};
use super::loss::FoliageLossModel;
use super::rotation::PoseRotation;
use crate::error::{Error, Result};
use crate::geometry::{wrap_deg, Direction, Vec3};

pub const DEFAULT_MASK_RESOLUTION_DEG: f64 = 0.1;

/// Boolean grid over azimuth [-180, 180) x elevation [-90, 90].
///
/// Cell `(i, j)` is centred on azimuth `-180 + (i + 0.5) * res` and
/// elevation `-90 + (j + 0.5) * res`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMask {
    resolution: f64,
    n_az: usize,
    n_el: usize,
    cells: Vec<bool>,
}

impl AngularMask {
    pub fn new(resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || resolution > 90.0 {
            return Err(Error::invalid(format!("mask resolution must be in (0, 90] deg, got {resolution}")));
        }
        let n_az = (360.0 / resolution).round() as usize;
        let n_el = (180.0 / resolution).round() as usize;
        if ((n_az as f64) * resolution - 360.0).abs() > 1e-6 || ((n_el as f64) * resolution - 180.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("mask resolution {resolution} must divide 180 deg")));
        }
        Ok(Self { resolution, n_az, n_el, cells: vec![false; n_az * n_el] })
    }

    pub fn from_fn(resolution: f64, f: impl Fn(Direction) -> bool + Sync) -> Result<Self> {
        let mut mask = Self::new(resolution)?;
        let n_az = mask.n_az;
        let res = mask.resolution;
        mask.cells.par_iter_mut().enumerate().for_each(|(k, c)| {
            let (i, j) = (k % n_az, k / n_az);
            *c = f(Direction::new(-180.0 + (i as f64 + 0.5) * res, -90.0 + (j as f64 + 0.5) * res));
        });
        Ok(mask)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_az, self.n_el)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.n_az + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.cells[j * self.n_az + i] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Direction {
        Direction::new(-180.0 + (i as f64 + 0.5) * self.resolution, -90.0 + (j as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, d: Direction) -> (usize, usize) {
        let i = ((d.azimuth + 180.0) / self.resolution).floor() as isize;
        let j = ((d.elevation + 90.0) / self.resolution).floor() as isize;
        (i.rem_euclid(self.n_az as isize) as usize, j.clamp(0, self.n_el as isize - 1) as usize)
    }

    pub fn is_foliage(&self, d: Direction) -> bool {
        let (i, j) = self.cell_of(d);
        self.get(i, j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoliageTwin {
    pub mask: AngularMask,
    pub pose: PoseRotation,
    pub erp: Option<ErpParams>,
    pub loss_model: FoliageLossModel,
}

impl FoliageTwin {
    /// Twin with no foliage anywhere.
    pub fn clear(resolution: f64) -> Result<Self> {
        Ok(Self::from_mask(AngularMask::new(resolution)?))
    }

    pub fn from_mask(mask: AngularMask) -> Self {
        Self { mask, pose: PoseRotation::identity(), erp: None, loss_model: FoliageLossModel::default() }
    }

    pub fn with_loss_model(mut self, model: FoliageLossModel) -> Self {
        self.loss_model = model;
        self
    }

    pub fn fcr(&self, center: Direction) -> Result<f64> {
        compute_fcr(self, center, self.loss_model.phi_th_deg)
    }
}

#[derive(Debug, Clone)]
pub struct TwinBuildConfig {
    pub prefilter: PrefilterConfig,
    pub n_neighbors: usize,
    pub resolution_deg: f64,
    pub loss_model: FoliageLossModel,
}

impl Default for TwinBuildConfig {
    fn default() -> Self {
        Self {
            prefilter: PrefilterConfig::default(),
            n_neighbors: super::knn::DEFAULT_NEIGHBORS,
            resolution_deg: DEFAULT_MASK_RESOLUTION_DEG,
            loss_model: FoliageLossModel::default(),
        }
    }
}

/// Camera-frame foliage flags per pixel after prefiltering and KNN.
pub fn classify_panorama(image: &RgbImage, training: &LabeledPixels, cfg: &TwinBuildConfig) -> Result<Vec<bool>> {
    if !training.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let candidates = prefilter_foliage(image, &cfg.prefilter);
    // panoramas repeat colors heavily; classify each distinct color once
    let mut colors: Vec<[u8; 3]> = candidates.iter().map(|&(x, y)| image.get_pixel(x, y).0).collect();
    colors.sort_unstable();
    colors.dedup();
    let classes: Vec<PixelClass> =
        colors.par_iter().map(|c| knn_classify(*c, training, cfg.n_neighbors)).collect::<Result<_>>()?;
    let lookup: HashMap<[u8; 3], PixelClass> = colors.into_iter().zip(classes).collect();

    let width = image.width() as usize;
    let mut flags = vec![false; width * image.height() as usize];
    for (x, y) in candidates {
        if lookup[&image.get_pixel(x, y).0] == PixelClass::Foliage {
            flags[y as usize * width + x as usize] = true;
        }
    }
    Ok(flags)
}

fn to_vec3(v: Vector3<f64>) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

fn to_vector(d: Direction) -> Vector3<f64> {
    let u = d.unit_vector();
    Vector3::new(u.x, u.y, u.z)
}

/// Builds the world-frame mask from a panorama.
///
/// Foliage pixels are projected forward into the world frame, and every
/// mask cell is additionally sampled back through the inverse pose so no
/// cell is skipped when pixels are sparser than cells after rotation.
pub fn build_twin(
    image: &RgbImage,
    erp: &ErpParams,
    pose: PoseRotation,
    training: &LabeledPixels,
    cfg: &TwinBuildConfig,
) -> Result<FoliageTwin> {
    erp.validate()?;
    if image.width() != erp.width || image.height() != erp.height {
        return Err(Error::invalid(format!(
            "image is {}x{} but projection expects {}x{}",
            image.width(),
            image.height(),
            erp.width,
            erp.height
        )));
    }
    cfg.loss_model.validate()?;
    let flags = classify_panorama(image, training, cfg)?;
    let width = erp.width as usize;

    let forward = pose.matrix();
    let inverse = pose.inverse().matrix();
    let mut mask = AngularMask::from_fn(cfg.resolution_deg, |world| {
        let cam = Direction::from_unit_vector(to_vec3(inverse * to_vector(world)));
        erp.camera_to_pixel(cam).is_some_and(|(x, y)| flags[y as usize * width + x as usize])
    })?;

    for (k, _) in flags.iter().enumerate().filter(|(_, f)| **f) {
        let (x, y) = ((k % width) as u32, (k / width) as u32);
        let cam = erp_pixel_to_camera(x, y, erp)?;
        let world = Direction::from_unit_vector(to_vec3(forward * to_vector(cam)));
        let (i, j) = mask.cell_of(world);
        mask.set(i, j, true);
    }

    Ok(FoliageTwin { mask, pose, erp: Some(*erp), loss_model: cfg.loss_model })
}

/// Fraction of mask cells within `phi_th` of `center` that hold foliage.
///
/// The window uses the planar metric on (wrapped azimuth, elevation)
/// differences.
pub fn compute_fcr(twin: &FoliageTwin, center: Direction, phi_th: f64) -> Result<f64> {
    if !(phi_th > 0.0) {
        return Err(Error::invalid(format!("phi_th must be positive, got {phi_th}")));
    }
    let mask = &twin.mask;
    let res = mask.resolution;
    let (n_az, n_el) = mask.dims();
    let j_lo = (((center.elevation - phi_th + 90.0) / res).floor().max(0.0)) as usize;
    let j_hi = ((((center.elevation + phi_th + 90.0) / res).ceil()) as usize).min(n_el - 1);
    let half_span = ((phi_th / res).ceil() as isize + 1).min(n_az as isize / 2);
    let i_center = ((center.azimuth + 180.0) / res).floor() as isize;

    let (mut total, mut foliage) = (0usize, 0usize);
    for j in j_lo..=j_hi {
        let del = -90.0 + (j as f64 + 0.5) * res - center.elevation;
        for di in -half_span..=half_span {
            let i = (i_center + di).rem_euclid(n_az as isize) as usize;
            let daz = wrap_deg(-180.0 + (i as f64 + 0.5) * res - center.azimuth);
            if (daz * daz + del * del).sqrt() < phi_th {
                total += 1;
                foliage += mask.get(i, j) as usize;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyWindow { phi_th });
    }
    Ok(foliage as f64 / total as f64)
}

// ---------------------------------------------------------------------------
// Serialization: metadata JSON next to a grayscale PNG (row 0 = zenith).
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TwinMetadata {
    pose: PoseRotation,
    erp: Option<ErpParams>,
    resolution_deg: f64,
    n_az: usize,
    n_el: usize,
    loss_model: FoliageLossModel,
    mask_file: String,
}

fn mask_path_for(meta_path: &Path) -> PathBuf {
    let stem = meta_path.file_stem().and_then(|s| s.to_str()).unwrap_or("twin");
    meta_path.with_file_name(format!("{stem}_mask.png"))
}

pub fn save_twin(twin: &FoliageTwin, meta_path: impl AsRef<Path>) -> Result<()> {
    let meta_path = meta_path.as_ref();
    let mask_path = mask_path_for(meta_path);
    let (n_az, n_el) = twin.mask.dims();
    let img = GrayImage::from_fn(n_az as u32, n_el as u32, |x, row| {
        let j = n_el - 1 - row as usize;
        Luma([if twin.mask.get(x as usize, j) { 255 } else { 0 }])
    });
    img.save(&mask_path)?;
    let meta = TwinMetadata {
        pose: twin.pose,
        erp: twin.erp,
        resolution_deg: twin.mask.resolution,
        n_az,
        n_el,
        loss_model: twin.loss_model,
        mask_file: mask_path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(meta_path, text).map_err(|e| Error::io(meta_path, e))
}

pub fn load_twin(meta_path: impl AsRef<Path>) -> Result<FoliageTwin> {
    let meta_path = meta_path.as_ref();
    let text = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: TwinMetadata = serde_json::from_str(&text)?;
    meta.loss_model.validate()?;
    let mask_path = meta_path.with_file_name(&meta.mask_file);
    let img = image::open(&mask_path)?.to_luma8();
    let mut mask = AngularMask::new(meta.resolution_deg)?;
    if mask.dims() != (meta.n_az, meta.n_el) || (img.width() as usize, img.height() as usize) != (meta.n_az, meta.n_el)
    {
        return Err(Error::Parse(format!("twin mask {} has inconsistent dimensions", mask_path.display())));
    }
    for (x, row, px) in img.enumerate_pixels() {
        mask.set(x as usize, meta.n_el - 1 - row as usize, px.0[0] >= 128);
    }
    Ok(FoliageTwin { mask, pose: meta.pose, erp: meta.erp, loss_model: meta.loss_model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliage::knn::LabeledPixel;
    use image::Rgb;

    fn training() -> LabeledPixels {
        let mut s = Vec::new();
        for k in 0..12u8 {
            s.push(LabeledPixel { x: 0, y: 0, rgb: [60 + k % 3, 90, 190], class: PixelClass::Foliage });
            s.push(LabeledPixel { x: 0, y: 0, rgb: [75, 66 + k % 3, 225], class: PixelClass::NonFoliage });
        }
        LabeledPixels::new(s)
    }

    fn half_foliage_image(erp: &ErpParams) -> RgbImage {
        RgbImage::from_fn(erp.width, erp.height, |x, _| {
            if x < erp.width / 2 {
                Rgb([61, 90, 190])
            } else {
                Rgb([250, 250, 250])
            }
        })
    }

    #[test]
    fn fcr_extremes_and_half_plane() {
        let full = FoliageTwin::from_mask(AngularMask::from_fn(0.5, |_| true).unwrap());
        assert_eq!(compute_fcr(&full, Direction::new(10.0, 0.0), 3.9).unwrap(), 1.0);
        let clear = FoliageTwin::clear(0.5).unwrap();
        assert_eq!(compute_fcr(&clear, Direction::new(10.0, 0.0), 3.9).unwrap(), 0.0);
        let half = FoliageTwin::from_mask(AngularMask::from_fn(0.1, |d| d.azimuth < 0.0).unwrap());
        let r = compute_fcr(&half, Direction::new(0.0, 0.0), 3.9).unwrap();
        assert!((r - 0.5).abs() < 0.02, "{r}");
        // window straddling the +-180 seam
        let r = compute_fcr(&half, Direction::new(-180.0, 0.0), 3.9).unwrap();
        assert!((r - 0.5).abs() < 0.02, "{r}");
    }

    #[test]
    fn tiny_window_is_an_error() {
        let clear = FoliageTwin::clear(1.0).unwrap();
        assert!(matches!(compute_fcr(&clear, Direction::new(0.3, 0.3), 0.01), Err(Error::EmptyWindow { .. })));
        assert!(compute_fcr(&clear, Direction::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn empty_prefilter_gives_clear_mask() {
        let erp = ErpParams::full_sphere(72, 36);
        let img = RgbImage::from_pixel(72, 36, Rgb([255, 255, 255]));
        let cfg = TwinBuildConfig { resolution_deg: 1.0, ..Default::default() };
        let twin = build_twin(&img, &erp, PoseRotation::identity(), &training(), &cfg).unwrap();
        assert_eq!(twin.mask.count(), 0);
    }

    #[test]
    fn half_image_maps_to_half_sphere() {
        let erp = ErpParams::full_sphere(720, 360);
        let cfg = TwinBuildConfig { resolution_deg: 1.0, n_neighbors: 3, ..Default::default() };
        let img = half_foliage_image(&erp);
        let twin = build_twin(&img, &erp, PoseRotation::identity(), &training(), &cfg).unwrap();
        let (n_az, n_el) = twin.mask.dims();
        for j in 0..n_el {
            for i in 0..n_az {
                let az = twin.mask.cell_center(i, j).azimuth;
                let expected = az < 0.0;
                let near_edge = (az.abs() < 1.0) || (az + 180.0).abs() < 1.0 || (az - 180.0).abs() < 1.0;
                if !near_edge {
                    assert_eq!(twin.mask.get(i, j), expected, "cell ({i},{j}) az={az}");
                }
            }
        }

        let rotated = build_twin(&img, &erp, PoseRotation::new(90.0, 0.0, 0.0), &training(), &cfg).unwrap();
        for j in 5..n_el - 5 {
            for i in 0..n_az {
                let az = rotated.mask.cell_center(i, j).azimuth;
                let expected = wrap_deg(az - 90.0) < 0.0;
                if wrap_deg(az - 90.0).abs() > 1.0 && wrap_deg(az + 90.0).abs() > 1.0 {
                    assert_eq!(rotated.mask.get(i, j), expected, "cell ({i},{j}) az={az}");
                }
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = AngularMask::from_fn(0.5, |d| d.elevation > 10.0 && d.azimuth < 30.0).unwrap();
        let twin = FoliageTwin { pose: PoseRotation::new(1.0, 2.0, 3.0), ..FoliageTwin::from_mask(mask) };
        let path = dir.path().join("twin.json");
        save_twin(&twin, &path).unwrap();
        assert!(dir.path().join("twin_mask.png").exists());
        assert_eq!(load_twin(&path).unwrap(), twin);
    }
}
