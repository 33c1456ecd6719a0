//! Dominant-path tracing: the geometric line-of-sight path and specular
//! first-order reflections off vertical facades, found with the image method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Vec3, SPEED_OF_LIGHT};
use crate::scene::{point_in_polygon, Building, Scene};

/// Free-space path gain in dB, `20 log10(c / (4 pi f d))`.
///
/// Negative in the far field; the positive path loss is its negation.
pub fn fspl(frequency: f64, distance: f64) -> Result<f64> {
    if !(frequency > 0.0) || !(distance > 0.0) {
        return Err(Error::invalid(format!(
            "fspl needs positive frequency and distance, got f={frequency}, d={distance}"
        )));
    }
    Ok(20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * frequency * distance)).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Reflection,
}

/// Identifies one vertical facade: the footprint edge starting at vertex
/// `facade` of building `building`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflector {
    pub building: usize,
    pub facade: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCandidate {
    pub kind: PathKind,
    pub geometric_length: f64,
    pub delay: f64,
    pub aod: Direction,
    pub aoa: Direction,
    pub gain_db: f64,
    pub reflector: Option<Reflector>,
    /// Specular point on the facade, for reflections.
    pub bounce: Option<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosResult {
    Clear,
    /// Blocked; carries the index of the building hit first along tx -> rx.
    Blocked(usize),
}

impl LosResult {
    pub fn is_clear(self) -> bool {
        matches!(self, LosResult::Clear)
    }
}

const MIN_SUBINTERVAL: f64 = 1e-9;

/// Parameter of the first point along the open segment `a -> b` that lies
/// strictly inside the prism, or `None` if the segment misses it.
fn segment_hits_prism(a: Vec3, b: Vec3, building: &Building) -> Option<f64> {
    let d = b - a;
    // clip to the slab 0 <= z <= height
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    if d.z.abs() < 1e-15 {
        if a.z < 0.0 || a.z >= building.height {
            return None;
        }
    } else {
        let ta = (0.0 - a.z) / d.z;
        let tb = (building.height - a.z) / d.z;
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    if t1 - t0 < MIN_SUBINTERVAL {
        return None;
    }

    let poly = &building.footprint;
    let horiz = (d.x * d.x + d.y * d.y).sqrt();
    if horiz < 1e-12 {
        let mid = 0.5 * (t0 + t1);
        return point_in_polygon(poly, a.x, a.y).then_some(mid);
    }

    // split [t0, t1] at every crossing with a footprint edge, then probe
    // the midpoint of each piece
    let mut cuts = vec![t0, t1];
    for (p, q) in building.edges() {
        let e = [q[0] - p[0], q[1] - p[1]];
        let denom = d.x * e[1] - d.y * e[0];
        if denom.abs() < 1e-15 {
            continue;
        }
        let w = [p[0] - a.x, p[1] - a.y];
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let u = (w[0] * d.y - w[1] * d.x) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&u) && t > t0 && t < t1 {
            cuts.push(t);
        }
    }
    cuts.sort_by(|x, y| x.total_cmp(y));
    for w in cuts.windows(2) {
        if w[1] - w[0] < MIN_SUBINTERVAL {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        if point_in_polygon(poly, a.x + tm * d.x, a.y + tm * d.y) {
            return Some(w[0]);
        }
    }
    None
}

fn first_blocker(scene: &Scene, a: Vec3, b: Vec3) -> Option<usize> {
    scene
        .buildings
        .iter()
        .enumerate()
        .filter_map(|(i, bld)| segment_hits_prism(a, b, bld).map(|t| (t, i)))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, i)| i)
}

pub fn geometric_los(scene: &Scene, rx: Vec3) -> Result<LosResult> {
    if rx == scene.tx {
        return Err(Error::invalid("rx coincides with tx"));
    }
    Ok(match first_blocker(scene, scene.tx, rx) {
        Some(i) => LosResult::Blocked(i),
        None => LosResult::Clear,
    })
}

fn los_candidate(scene: &Scene, rx: Vec3) -> PathCandidate {
    let length = scene.tx.distance(rx);
    PathCandidate {
        kind: PathKind::Los,
        geometric_length: length,
        delay: length / SPEED_OF_LIGHT,
        aod: (rx - scene.tx).direction(),
        aoa: (scene.tx - rx).direction(),
        gain_db: fspl(scene.frequency, length).expect("positive length"),
        reflector: None,
        bounce: None,
    }
}

/// Specular reflection of `tx -> rx` on one facade, before occlusion checks.
fn specular_point(tx: Vec3, rx: Vec3, p: [f64; 2], q: [f64; 2], height: f64) -> Option<Vec3> {
    let e = [q[0] - p[0], q[1] - p[1]];
    let len = e[0].hypot(e[1]);
    if len < 1e-12 {
        return None;
    }
    let tangent = [e[0] / len, e[1] / len];
    // counterclockwise ring: outward normal is the edge rotated clockwise
    let normal = [tangent[1], -tangent[0]];
    let dist_tx = (tx.x - p[0]) * normal[0] + (tx.y - p[1]) * normal[1];
    let dist_rx = (rx.x - p[0]) * normal[0] + (rx.y - p[1]) * normal[1];
    if dist_tx <= 0.0 || dist_rx <= 0.0 {
        return None;
    }
    let image = Vec3::new(tx.x - 2.0 * dist_tx * normal[0], tx.y - 2.0 * dist_tx * normal[1], tx.z);
    let s = dist_tx / (dist_tx + dist_rx);
    let hit = image + (rx - image) * s;
    let along = (hit.x - p[0]) * tangent[0] + (hit.y - p[1]) * tangent[1];
    if along < 0.0 || along > len || hit.z < 0.0 || hit.z > height {
        return None;
    }
    Some(hit)
}

/// All dominant paths from the scene transmitter to `rx`.
///
/// An empty result means a geometric outage.
pub fn trace_first_order(scene: &Scene, rx: Vec3) -> Vec<PathCandidate> {
    let tx = scene.tx;
    let mut out = Vec::new();
    if rx == tx {
        return out;
    }
    if first_blocker(scene, tx, rx).is_none() {
        out.push(los_candidate(scene, rx));
    }

    for (bi, building) in scene.buildings.iter().enumerate() {
        for (fi, (p, q)) in building.edges().enumerate() {
            let Some(hit) = specular_point(tx, rx, p, q, building.height) else {
                continue;
            };
            if first_blocker(scene, tx, hit).is_some() || first_blocker(scene, hit, rx).is_some() {
                continue;
            }
            let length = tx.distance(hit) + hit.distance(rx);
            out.push(PathCandidate {
                kind: PathKind::Reflection,
                geometric_length: length,
                delay: length / SPEED_OF_LIGHT,
                aod: (hit - tx).direction(),
                aoa: (hit - rx).direction(),
                gain_db: fspl(scene.frequency, length).expect("positive length") - building.material_reflection_loss,
                reflector: Some(Reflector { building: bi, facade: fi }),
                bounce: Some(hit),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall_scene() -> Scene {
        let mut s = Scene::free_space(Vec3::new(0.0, 0.0, 2.0), 220e9);
        s.buildings.push(Building::rectangle([10.0, -50.0], [11.0, 50.0], 10.0));
        s
    }

    #[test]
    fn fspl_values() {
        let g = fspl(220e9, 1.0).unwrap();
        let direct = 20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * 220e9)).log10();
        assert_eq!(g, direct);
        assert!((g + 79.29).abs() < 0.01, "{g}");
        let d = fspl(3e11, 20.0).unwrap() - fspl(3e11, 10.0).unwrap();
        assert!((d + 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(fspl(0.0, 1.0).is_err());
        assert!(fspl(1e9, -1.0).is_err());
    }

    #[test]
    fn free_space_single_los() {
        let s = Scene::free_space(Vec3::new(0.0, 0.0, 16.6), 220e9);
        let rx = Vec3::new(30.0, 40.0, 1.6);
        let c = trace_first_order(&s, rx);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, PathKind::Los);
        assert_eq!(c[0].gain_db, fspl(220e9, s.tx.distance(rx)).unwrap());
        let daz = crate::geometry::wrap_deg(c[0].aod.azimuth - c[0].aoa.azimuth);
        assert!((daz.abs() - 180.0).abs() < 1e-9);
        assert!((c[0].aod.elevation + c[0].aoa.elevation).abs() < 1e-9);
    }

    #[test]
    fn image_method_wall() {
        let s = wall_scene();
        let rx = Vec3::new(0.0, 5.0, 2.0);
        let c = trace_first_order(&s, rx);
        let refl: Vec<_> = c.iter().filter(|c| c.kind == PathKind::Reflection).collect();
        assert_eq!(refl.len(), 1);
        let expected = Vec3::new(20.0, 0.0, 2.0).distance(rx);
        assert!((refl[0].geometric_length - expected).abs() < 1e-12);
        assert!((refl[0].delay - expected / SPEED_OF_LIGHT).abs() < 1e-20);
        assert_eq!(refl[0].reflector, Some(Reflector { building: 0, facade: 3 }));
        let hit = refl[0].bounce.unwrap();
        assert!((hit.x - 10.0).abs() < 1e-12 && (hit.y - 2.5).abs() < 1e-12);
    }

    #[test]
    fn los_blocked_by_cube() {
        let mut s = Scene::free_space(Vec3::new(0.0, 0.0, 0.5), 220e9);
        s.buildings.push(Building::rectangle([2.0, -0.5], [3.0, 0.5], 1.0));
        assert_eq!(geometric_los(&s, Vec3::new(5.0, 0.0, 0.5)).unwrap(), LosResult::Blocked(0));
        // passing over the roof
        s.tx.z = 2.0;
        assert_eq!(geometric_los(&s, Vec3::new(5.0, 0.0, 2.0)).unwrap(), LosResult::Clear);
        assert!(geometric_los(&s, s.tx).is_err());
    }

    #[test]
    fn enclosed_courtyard_is_outage() {
        let mut s = Scene::free_space(Vec3::new(60.0, 0.0, 5.0), 220e9);
        s.buildings.push(Building::rectangle([-11.0, -11.0], [-10.0, 11.0], 20.0));
        s.buildings.push(Building::rectangle([10.0, -11.0], [11.0, 11.0], 20.0));
        s.buildings.push(Building::rectangle([-10.0, -11.0], [10.0, -10.0], 20.0));
        s.buildings.push(Building::rectangle([-10.0, 10.0], [10.0, 11.0], 20.0));
        assert!(trace_first_order(&s, Vec3::new(0.0, 0.0, 1.6)).is_empty());
    }
}
