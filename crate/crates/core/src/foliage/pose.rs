//! Camera pose recovery from reference points with known world directions.
//!
//! The cost is the sum of squared great-circle distances between the
//! rotated camera directions and the world directions. A 2 deg exhaustive
//! grid over the three angles finds the basin, Levenberg-Marquardt on the
//! tangent-plane residuals polishes it.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rotation::{rot_y, rot_z, PoseRotation};
use crate::error::{Error, Result};
use crate::geometry::{wrap_deg, Direction};

const GRID_STEP_DEG: f64 = 2.0;
const DEGENERATE_SPREAD_DEG: f64 = 1.0;
/// Below this tilt the two z rotations are indistinguishable and get merged.
const GIMBAL_EPS_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseReference {
    pub camera: Direction,
    pub world: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSolution {
    pub pose: PoseRotation,
    /// RMS great-circle residual over the references, degrees.
    pub residual_rms_deg: f64,
}

fn unit(d: Direction) -> Vector3<f64> {
    let v = d.unit_vector();
    Vector3::new(v.x, v.y, v.z)
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Largest angular distance of any point from the best-fit great circle.
fn great_circle_spread_deg(points: &[Vector3<f64>]) -> f64 {
    let scatter: Matrix3<f64> = points.iter().map(|u| u * u.transpose()).sum();
    let eig = SymmetricEigen::new(scatter);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("3x3 has eigenvalues");
    let normal = eig.eigenvectors.column(imin).into_owned();
    points.iter().map(|u| u.dot(&normal).abs().min(1.0).asin().to_degrees()).fold(0.0, f64::max)
}

fn cost(rot: &Matrix3<f64>, cams: &[Vector3<f64>], worlds: &[Vector3<f64>]) -> f64 {
    cams.iter().zip(worlds).map(|(c, w)| angle_between(&(rot * c), w).powi(2)).sum()
}

/// Tangent-plane residual whose norm is the great-circle angle.
fn residuals(angles: &[f64; 3], cams: &[Vector3<f64>], worlds: &[Vector3<f64>]) -> Vec<f64> {
    let rot = PoseRotation { alpha_z1: angles[0], alpha_y: angles[1], alpha_z2: angles[2] }.matrix();
    let mut out = Vec::with_capacity(cams.len() * 3);
    for (c, w) in cams.iter().zip(worlds) {
        let v = rot * c;
        let theta = angle_between(&v, w);
        let tangent = w - v * v.dot(w);
        let n = tangent.norm();
        let r = if n > 1e-15 { tangent * (theta / n) } else { w - v };
        out.extend_from_slice(r.as_slice());
    }
    out
}

fn levenberg_marquardt(start: [f64; 3], cams: &[Vector3<f64>], worlds: &[Vector3<f64>]) -> [f64; 3] {
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut x = start;
    let mut r = residuals(&x, cams, worlds);
    let mut f = sq(&r);
    let mut lambda = 1e-3;
    // finite-difference step in degrees
    let h = 1e-6;
    for _ in 0..500 {
        let mut jac = vec![[0.0; 3]; r.len()];
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let rp = residuals(&xp, cams, worlds);
            let rm = residuals(&xm, cams, worlds);
            for i in 0..r.len() {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for a in 0..3 {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let rc = residuals(&cand, cams, worlds);
            let fc = sq(&rc);
            if fc < f {
                let moved = step.norm();
                x = cand;
                r = rc;
                f = fc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if moved < 1e-10 {
                    return x;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || f < 1e-30 {
            break;
        }
    }
    x
}

/// Maps a triple onto the canonical representative with tilt in [0, 180].
fn canonical(angles: [f64; 3]) -> PoseRotation {
    let (mut a, mut b, mut c) = (angles[0], wrap_deg(angles[1]), angles[2]);
    if b < 0.0 {
        a += 180.0;
        b = -b;
        c += 180.0;
    }
    if b < GIMBAL_EPS_DEG {
        a += c;
        b = 0.0;
        c = 0.0;
    }
    PoseRotation::new(a, b, c)
}

/// Finds the z-y-z camera pose that best maps the camera directions of the
/// references onto their world directions.
pub fn solve_pose(refs: &[PoseReference]) -> Result<PoseSolution> {
    if refs.len() < 3 {
        return Err(Error::DegenerateReferences(format!("need at least 3 references, got {}", refs.len())));
    }
    let cams: Vec<_> = refs.iter().map(|r| unit(r.camera)).collect();
    let worlds: Vec<_> = refs.iter().map(|r| unit(r.world)).collect();
    for (frame, pts) in [("camera", &cams), ("world", &worlds)] {
        let spread = great_circle_spread_deg(pts);
        if spread < DEGENERATE_SPREAD_DEG {
            return Err(Error::DegenerateReferences(format!(
                "all {frame} references lie within {spread:.3} deg of one great circle"
            )));
        }
    }

    let n_az = (360.0 / GRID_STEP_DEG) as usize;
    let n_tilt = (180.0 / GRID_STEP_DEG) as usize + 1;
    let rz: Vec<Matrix3<f64>> = (0..n_az).map(|i| rot_z(-180.0 + i as f64 * GRID_STEP_DEG)).collect();
    // ties broken by grid index so the parallel reduction is deterministic
    let (best_cost, _, best) = (0..n_az * n_tilt)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_tilt, k % n_tilt);
            let inner = rot_y(j as f64 * GRID_STEP_DEG) * rz[i];
            let mut local = (f64::INFINITY, k, [0.0; 3]);
            for (l, outer) in rz.iter().enumerate() {
                let c = cost(&(outer * inner), &cams, &worlds);
                if c < local.0 {
                    local = (
                        c,
                        k,
                        [
                            -180.0 + i as f64 * GRID_STEP_DEG,
                            j as f64 * GRID_STEP_DEG,
                            -180.0 + l as f64 * GRID_STEP_DEG,
                        ],
                    );
                }
            }
            local
        })
        .reduce(|| (f64::INFINITY, usize::MAX, [0.0; 3]), |a, b| if (b.0, b.1) < (a.0, a.1) { b } else { a });
    debug_assert!(best_cost.is_finite());

    let refined = canonical(levenberg_marquardt(best, &cams, &worlds));
    let rot = refined.matrix();
    let rms = (cost(&rot, &cams, &worlds) / refs.len() as f64).sqrt().to_degrees();
    Ok(PoseSolution { pose: refined, residual_rms_deg: rms })
}
