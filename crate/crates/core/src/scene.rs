//! Building geometry and scene files.
//!
//! Buildings are vertical prisms with flat roofs standing on the z = 0
//! plane. Footprints are stored counterclockwise.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const DEFAULT_REFLECTION_LOSS_DB: f64 = 10.0;

const THZ_BAND_HZ: (f64, f64) = (0.1e12, 10e12);

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
    pub material_reflection_loss: f64,
}

impl Building {
    pub fn new(footprint: Vec<[f64; 2]>, height: f64) -> Self {
        Self { footprint, height, material_reflection_loss: DEFAULT_REFLECTION_LOSS_DB }
    }

    /// Axis-aligned box footprint, counterclockwise.
    pub fn rectangle(min: [f64; 2], max: [f64; 2], height: f64) -> Self {
        Self::new(vec![[min[0], min[1]], [max[0], min[1]], [max[0], max[1]], [min[0], max[1]]], height)
    }

    pub fn with_reflection_loss(mut self, loss_db: f64) -> Self {
        self.material_reflection_loss = loss_db;
        self
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.footprint)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.footprint, x, y)
    }

    /// True if the point lies strictly inside the prism volume.
    pub fn contains(&self, p: Vec3) -> bool {
        p.z >= 0.0 && p.z < self.height && self.contains_xy(p.x, p.y)
    }

    /// Footprint edges as (start, end) pairs, closing the ring.
    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.footprint.len();
        (0..n).map(move |i| (self.footprint[i], self.footprint[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub buildings: Vec<Building>,
    pub tx: Vec3,
    pub frequency: f64,
}

impl Scene {
    pub fn free_space(tx: Vec3, frequency: f64) -> Self {
        Self { buildings: Vec::new(), tx, frequency }
    }

    /// Reverses clockwise footprints in place. Returns the indices touched.
    pub fn normalize_orientation(&mut self) -> Vec<usize> {
        let mut touched = Vec::new();
        for (i, b) in self.buildings.iter_mut().enumerate() {
            if signed_area(&b.footprint) < 0.0 {
                b.footprint.reverse();
                touched.push(i);
            }
        }
        touched
    }

    pub fn is_valid(&self) -> bool {
        validate_scene(self).iter().all(|d| d.severity != Severity::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub building: Option<usize>,
    pub severity: Severity,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.building {
            Some(i) => write!(f, "{sev}: building {i}: {}", self.reason),
            None => write!(f, "{sev}: {}", self.reason),
        }
    }
}

fn diag(building: Option<usize>, severity: Severity, reason: &str) -> Diagnostic {
    Diagnostic { building, severity, reason: reason.to_string() }
}

/// Checks every scene invariant without modifying the scene.
pub fn validate_scene(scene: &Scene) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !scene.tx.is_finite() {
        out.push(diag(None, Severity::Error, "tx has non-finite coordinates"));
    } else if scene.tx.z <= 0.0 {
        out.push(diag(None, Severity::Error, "tx height must be positive"));
    }
    if !(scene.frequency > 0.0) || !scene.frequency.is_finite() {
        out.push(diag(None, Severity::Error, "frequency must be positive"));
    } else if scene.frequency <= THZ_BAND_HZ.0 || scene.frequency >= THZ_BAND_HZ.1 {
        out.push(diag(None, Severity::Warning, "frequency outside the THz band"));
    }

    for (i, b) in scene.buildings.iter().enumerate() {
        let idx = Some(i);
        if b.footprint.len() < 3 {
            out.push(diag(idx, Severity::Error, "degenerate polygon"));
            continue;
        }
        if b.footprint.iter().flatten().any(|c| !c.is_finite()) {
            out.push(diag(idx, Severity::Error, "non-finite footprint vertex"));
            continue;
        }
        if !(b.height > 0.0) {
            out.push(diag(idx, Severity::Error, "non-positive height"));
        }
        if !(b.material_reflection_loss >= 0.0) {
            out.push(diag(idx, Severity::Error, "negative reflection loss"));
        }
        if is_self_intersecting(&b.footprint) {
            out.push(diag(idx, Severity::Error, "self-intersecting footprint"));
        } else if signed_area(&b.footprint) < 0.0 {
            out.push(diag(idx, Severity::Warning, "orientation normalized"));
        }
        if scene.tx.is_finite() && b.contains(scene.tx) {
            out.push(diag(idx, Severity::Error, "tx embedded in geometry"));
        }
    }
    out
}

pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

/// Even-odd rule point-in-polygon test.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// O(n²) check over non-adjacent edge pairs; repeated vertices also count.
pub fn is_self_intersecting(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if poly[i] == poly[j] {
                return true;
            }
        }
    }
    if signed_area(poly) == 0.0 {
        return true;
    }
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TxRecord {
    x: f64,
    y: f64,
    z: f64,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BuildingRecord {
    footprint: Vec<[f64; 2]>,
    height_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reflection_loss_db: Option<f64>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneRecord {
    frequency_hz: f64,
    tx: TxRecord,
    #[serde(default)]
    buildings: Vec<BuildingRecord>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

fn warn_unknown(context: &str, extra: &BTreeMap<String, serde_json::Value>) {
    for key in extra.keys() {
        warn!("scene file: ignoring unknown field `{key}` in {context}");
    }
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let rec: SceneRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    warn_unknown("document", &rec.extra);
    warn_unknown("tx", &rec.tx.extra);

    let mut buildings = Vec::with_capacity(rec.buildings.len());
    for (index, b) in rec.buildings.into_iter().enumerate() {
        warn_unknown(&format!("building {index}"), &b.extra);
        let mut footprint = b.footprint;
        // GeoJSON-style closed rings repeat the first vertex
        if footprint.len() > 1 && footprint.first() == footprint.last() {
            footprint.pop();
        }
        if footprint.len() < 3 {
            return Err(Error::DegeneratePolygon { index, vertices: footprint.len() });
        }
        if footprint.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Parse(format!("building {index}: non-finite vertex")));
        }
        if is_self_intersecting(&footprint) {
            return Err(Error::SelfIntersecting { index });
        }
        if !(b.height_m > 0.0) {
            return Err(Error::NonPositiveHeight { index, height: b.height_m });
        }
        let loss = b.reflection_loss_db.unwrap_or(DEFAULT_REFLECTION_LOSS_DB);
        if !(loss >= 0.0) {
            return Err(Error::Parse(format!("building {index}: negative reflection loss")));
        }
        buildings.push(Building { footprint, height: b.height_m, material_reflection_loss: loss });
    }

    let mut scene = Scene { buildings, tx: Vec3::new(rec.tx.x, rec.tx.y, rec.tx.z), frequency: rec.frequency_hz };
    for i in scene.normalize_orientation() {
        warn!("building {i}: clockwise footprint, orientation normalized");
    }

    for d in validate_scene(&scene) {
        match d.severity {
            Severity::Warning => warn!("{d}"),
            Severity::Error => return Err(Error::Parse(d.to_string())),
        }
    }
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text)
}

pub fn scene_to_string(scene: &Scene) -> String {
    let rec = SceneRecord {
        frequency_hz: scene.frequency,
        tx: TxRecord { x: scene.tx.x, y: scene.tx.y, z: scene.tx.z, extra: BTreeMap::new() },
        buildings: scene
            .buildings
            .iter()
            .map(|b| BuildingRecord {
                footprint: b.footprint.clone(),
                height_m: b.height,
                reflection_loss_db: Some(b.material_reflection_loss),
                extra: BTreeMap::new(),
            })
            .collect(),
        extra: BTreeMap::new(),
    };
    serde_json::to_string_pretty(&rec).expect("scene serialization cannot fail")
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_string(scene)).map_err(|e| Error::io(path, e))
}
