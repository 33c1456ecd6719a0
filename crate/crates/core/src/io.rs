//! Tabular file formats: MPC records, CIR taps, metrics rows, link
//! results, receiver lists, pose references and pixel labels.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::characterization::Metrics;
use crate::error::{Error, Result};
use crate::foliage::{erp_pixel_to_camera, ErpParams, LabeledPixel, LabeledPixels, PixelClass, PoseReference};
use crate::geometry::{Direction, Vec3};
use crate::stochastic::LinkState;
use crate::synthesis::{ChannelRealization, Cir, Mpc, MpcOrigin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcRecord {
    pub realization_id: usize,
    pub state: LinkState,
    pub origin: MpcOrigin,
    pub gain_db: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
}

impl MpcRecord {
    pub fn new(realization_id: usize, state: LinkState, m: &Mpc) -> Self {
        Self {
            realization_id,
            state,
            origin: m.origin,
            gain_db: m.gain_db,
            phase_rad: m.phase,
            delay_s: m.delay,
            aod_az: m.aod.azimuth,
            aod_el: m.aod.elevation,
            aoa_az: m.aoa.azimuth,
            aoa_el: m.aoa.elevation,
        }
    }

    pub fn to_mpc(&self) -> Mpc {
        Mpc {
            origin: self.origin,
            gain_db: self.gain_db,
            phase: self.phase_rad,
            delay: self.delay_s,
            aod: Direction::new(self.aod_az, self.aod_el),
            aoa: Direction::new(self.aoa_az, self.aoa_el),
        }
    }
}

pub fn mpc_records(realizations: &[ChannelRealization]) -> Vec<MpcRecord> {
    realizations
        .iter()
        .enumerate()
        .flat_map(|(id, r)| r.mpcs.iter().map(move |m| MpcRecord::new(id, r.state, m)))
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

/// Writes serializable rows as CSV with a header; the header is written even
/// for an empty table when `header` is given.
fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(create(path)?);
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const MPC_HEADER: [&str; 10] =
    ["realization_id", "state", "origin", "gain_db", "phase_rad", "delay_s", "aod_az", "aod_el", "aoa_az", "aoa_el"];

pub fn write_mpc_csv(path: impl AsRef<Path>, records: &[MpcRecord]) -> Result<()> {
    write_csv(path.as_ref(), records, &MPC_HEADER)
}

pub fn write_mpc_jsonl(path: impl AsRef<Path>, records: &[MpcRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads MPC records from CSV, or from line-delimited JSON when the file
/// extension is `jsonl`.
pub fn read_mpc_records(path: impl AsRef<Path>) -> Result<Vec<MpcRecord>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    } else {
        read_csv(path)
    }
}

/// Groups records by realization id, preserving record order.
pub fn group_records(records: &[MpcRecord]) -> BTreeMap<usize, (LinkState, Vec<Mpc>)> {
    let mut out: BTreeMap<usize, (LinkState, Vec<Mpc>)> = BTreeMap::new();
    for r in records {
        out.entry(r.realization_id).or_insert_with(|| (r.state, Vec::new())).1.push(r.to_mpc());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirRecord {
    pub bin_index: usize,
    pub delay_s: f64,
    pub re: f64,
    pub im: f64,
}

pub fn write_cir_csv(path: impl AsRef<Path>, cir: &Cir) -> Result<()> {
    let rows: Vec<_> = cir
        .taps
        .iter()
        .enumerate()
        .map(|(i, t)| CirRecord { bin_index: i, delay_s: cir.delay_of(i), re: t.re, im: t.im })
        .collect();
    write_csv(path.as_ref(), &rows, &["bin_index", "delay_s", "re", "im"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetricsRecord {
    realization_id: usize,
    state: LinkState,
    pl_db: f64,
    ds_s: Option<f64>,
    asa_deg: Option<f64>,
    esa_deg: Option<f64>,
    kf_db: Option<f64>,
    n_clusters: usize,
}

pub fn write_metrics_csv(path: impl AsRef<Path>, metrics: &[Metrics]) -> Result<()> {
    let rows: Vec<_> = metrics
        .iter()
        .map(|m| MetricsRecord {
            realization_id: m.realization_id,
            state: m.state,
            pl_db: m.pl_db,
            ds_s: m.ds_s,
            asa_deg: m.asa_deg,
            esa_deg: m.esa_deg,
            kf_db: m.kf_db,
            n_clusters: m.n_clusters,
        })
        .collect();
    write_csv(
        path.as_ref(),
        &rows,
        &["realization_id", "state", "pl_db", "ds_s", "asa_deg", "esa_deg", "kf_db", "n_clusters"],
    )
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<Metrics>> {
    let rows: Vec<MetricsRecord> = read_csv(path.as_ref())?;
    Ok(rows
        .into_iter()
        .map(|m| Metrics {
            realization_id: m.realization_id,
            state: m.state,
            pl_db: m.pl_db,
            ds_s: m.ds_s,
            asa_deg: m.asa_deg,
            esa_deg: m.esa_deg,
            kf_db: m.kf_db,
            n_clusters: m.n_clusters,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEvalRecord {
    pub total_gain_db: f64,
    pub cell_radius_m: f64,
    pub mean_se_bps_hz: f64,
    pub coverage_ratio: f64,
    pub n_drops: usize,
    pub seed: u64,
}

pub fn write_linkeval_csv(path: impl AsRef<Path>, rows: &[LinkEvalRecord]) -> Result<()> {
    write_csv(
        path.as_ref(),
        rows,
        &["total_gain_db", "cell_radius_m", "mean_se_bps_hz", "coverage_ratio", "n_drops", "seed"],
    )
}

pub fn read_linkeval_csv(path: impl AsRef<Path>) -> Result<Vec<LinkEvalRecord>> {
    read_csv(path.as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RxRecord {
    x: f64,
    y: f64,
    z: f64,
}

/// Receiver positions from a CSV with `x,y,z` columns; extra columns such
/// as a point name are ignored.
pub fn read_rx_positions(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let rows: Vec<RxRecord> = read_csv(path.as_ref())?;
    Ok(rows.into_iter().map(|r| Vec3::new(r.x, r.y, r.z)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefRecord {
    pub name: String,
    pub pixel_x: u32,
    pub pixel_y: u32,
    pub world_az_deg: f64,
    pub world_el_deg: f64,
}

pub fn read_refs(path: impl AsRef<Path>) -> Result<Vec<RefRecord>> {
    read_csv(path.as_ref())
}

pub fn write_refs(path: impl AsRef<Path>, refs: &[RefRecord]) -> Result<()> {
    write_csv(path.as_ref(), refs, &["name", "pixel_x", "pixel_y", "world_az_deg", "world_el_deg"])
}

pub fn pose_references(refs: &[RefRecord], erp: &ErpParams) -> Result<Vec<PoseReference>> {
    refs.iter()
        .map(|r| {
            Ok(PoseReference {
                camera: erp_pixel_to_camera(r.pixel_x, r.pixel_y, erp)?,
                world: Direction::new(r.world_az_deg, r.world_el_deg),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub pixel_x: u32,
    pub pixel_y: u32,
    pub class: u8,
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    read_csv(path.as_ref())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[LabelRecord]) -> Result<()> {
    write_csv(path.as_ref(), labels, &["pixel_x", "pixel_y", "class"])
}

/// Attaches pixel colors from `image` to the labels.
pub fn labeled_pixels(image: &RgbImage, labels: &[LabelRecord]) -> Result<LabeledPixels> {
    let (width, height) = image.dimensions();
    labels
        .iter()
        .map(|l| {
            if l.pixel_x >= width || l.pixel_y >= height {
                return Err(Error::PixelOutOfBounds { x: l.pixel_x, y: l.pixel_y, width, height });
            }
            Ok(LabeledPixel {
                x: l.pixel_x,
                y: l.pixel_y,
                rgb: image.get_pixel(l.pixel_x, l.pixel_y).0,
                class: PixelClass::from_label(l.class)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(LabeledPixels::new)
}
