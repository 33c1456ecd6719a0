//! Channel characteristics of MPC lists: dynamic-range thresholding, delay
//! and angular spreads, K-factor, MCD-based DBSCAN clustering and the
//! close-in path loss fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raytrace::fspl;
use crate::stochastic::LinkState;
use crate::synthesis::{ChannelRealization, Mpc};

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 30.0;
pub const DEFAULT_NOISE_FLOOR_DB: f64 = -180.5;
/// Margin above the noise floor for a path to count as detected.
const NOISE_MARGIN_DB: f64 = 20.0;

/// Keeps MPCs within `range_db` of the strongest one and at least 20 dB
/// above `noise_floor_db`. The strongest MPC is always kept.
pub fn apply_dynamic_range(mpcs: &[Mpc], range_db: f64, noise_floor_db: f64) -> Result<Vec<Mpc>> {
    if mpcs.is_empty() {
        return Err(Error::EmptyInput("MPC list"));
    }
    if !(range_db > 0.0) {
        return Err(Error::invalid(format!("dynamic range must be positive, got {range_db}")));
    }
    let (strongest, top) = mpcs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gain_db.total_cmp(&b.1.gain_db))
        .map(|(i, m)| (i, m.gain_db))
        .expect("non-empty");
    let cutoff = (top - range_db).max(noise_floor_db + NOISE_MARGIN_DB);
    Ok(mpcs.iter().enumerate().filter(|(i, m)| *i == strongest || m.gain_db >= cutoff).map(|(_, m)| *m).collect())
}

/// Power-weighted standard deviation of `values`.
pub fn weighted_delay_spread(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    var.max(0.0).sqrt()
}

/// Weighted circular RMS spread of angles in degrees: the minimum over
/// reference rotations of the weighted RMS of wrapped deviations.
///
/// The wrapped deviations only change when a sample crosses the +-180 seam,
/// so it suffices to cut the circle in each gap between sorted angles.
pub fn circular_spread(values: &[f64], weights: &[f64]) -> f64 {
    if values.len() <= 1 {
        return 0.0;
    }
    let mut pts: Vec<(f64, f64)> = values.iter().zip(weights).map(|(v, w)| (v.rem_euclid(360.0), *w)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return 0.0;
    }
    // running sums over the unwrapped sequence starting after cut k
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in &pts {
        s1 += p.1 * p.0;
        s2 += p.1 * p.0 * p.0;
    }
    let mut best = f64::INFINITY;
    for k in 0..pts.len() {
        if k > 0 {
            // move point k-1 to the end by adding a full turn
            let (a, w) = pts[k - 1];
            let b = a + 360.0;
            s1 += w * (b - a);
            s2 += w * (b * b - a * a);
        }
        let mean = s1 / total;
        let var = s2 / total - mean * mean;
        best = best.min(var.max(0.0));
    }
    best.sqrt()
}

fn weights(mpcs: &[Mpc]) -> Vec<f64> {
    mpcs.iter().map(Mpc::power).collect()
}

pub fn rms_delay_spread(mpcs: &[Mpc]) -> Result<f64> {
    if mpcs.is_empty() {
        return Err(Error::EmptyInput("MPC list"));
    }
    let delays: Vec<f64> = mpcs.iter().map(|m| m.delay).collect();
    Ok(weighted_delay_spread(&delays, &weights(mpcs)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleDimension {
    AoaAz,
    AoaEl,
    AodAz,
    AodEl,
}

pub fn angular_spread(mpcs: &[Mpc], dim: AngleDimension) -> Result<f64> {
    if mpcs.is_empty() {
        return Err(Error::EmptyInput("MPC list"));
    }
    let angles: Vec<f64> = mpcs
        .iter()
        .map(|m| match dim {
            AngleDimension::AoaAz => m.aoa.azimuth,
            AngleDimension::AoaEl => m.aoa.elevation,
            AngleDimension::AodAz => m.aod.azimuth,
            AngleDimension::AodEl => m.aod.elevation,
        })
        .collect();
    Ok(circular_spread(&angles, &weights(mpcs)))
}

/// Ratio of the strongest cluster power to the sum of the others, dB.
pub fn k_factor(cluster_powers: &[f64]) -> Result<f64> {
    if cluster_powers.len() < 2 {
        return Err(Error::InsufficientClusters(cluster_powers.len()));
    }
    let (imax, pmax) =
        cluster_powers.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, p)| (i, *p)).expect("non-empty");
    let rest: f64 = cluster_powers.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, p)| p).sum();
    Ok(10.0 * (pmax / rest).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
    /// Delay weighting of the MCD.
    pub zeta: f64,
    /// Add the departure-angle term to the MCD.
    pub use_aod: bool,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        Self { eps: 0.2, min_pts: 3, zeta: 8.0, use_aod: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster index per MPC, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn noise(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, l)| l.is_none()).map(|(i, _)| i).collect()
    }
}

/// Pairwise multipath component distance matrix.
pub fn mcd_matrix(mpcs: &[Mpc], cfg: &DbscanConfig) -> Vec<Vec<f64>> {
    let n = mpcs.len();
    let delays: Vec<f64> = mpcs.iter().map(|m| m.delay).collect();
    let tau_std = weighted_delay_spread(&delays, &weights(mpcs));
    let tau_span =
        delays.iter().copied().fold(f64::NEG_INFINITY, f64::max) - delays.iter().copied().fold(f64::INFINITY, f64::min);
    let aoa: Vec<_> = mpcs.iter().map(|m| m.aoa.unit_vector()).collect();
    let aod: Vec<_> = mpcs.iter().map(|m| m.aod.unit_vector()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let mut d2 = (aoa[i] - aoa[j]).dot(aoa[i] - aoa[j]) / 4.0;
            if cfg.use_aod {
                d2 += (aod[i] - aod[j]).dot(aod[i] - aod[j]) / 4.0;
            }
            if tau_span > 0.0 {
                let t = cfg.zeta * (delays[i] - delays[j]).abs() * tau_std / (tau_span * tau_span);
                d2 += t * t;
            }
            out[i][j] = d2.sqrt();
            out[j][i] = out[i][j];
        }
    }
    out
}

/// DBSCAN over the MCD. Core points are grouped by core-to-core
/// reachability; a border point joins the lowest-numbered neighbouring
/// cluster. Clusters are numbered by their lowest core index.
pub fn cluster_mcd_dbscan(mpcs: &[Mpc], cfg: &DbscanConfig) -> ClusterAssignment {
    let n = mpcs.len();
    let dist = mcd_matrix(mpcs, cfg);
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| dist[i][j] <= cfg.eps).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= cfg.min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let mut stack = vec![start];
        labels[start] = Some(next);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        labels[i] = neighbors[i].iter().filter(|&&q| core[q]).filter_map(|&q| labels[q]).min();
    }
    let mut clusters = vec![Vec::new(); next];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            clusters[*c].push(i);
        }
    }
    ClusterAssignment { labels, clusters }
}

/// Cluster powers where each noise MPC counts as its own cluster.
pub fn cluster_powers(mpcs: &[Mpc], assignment: &ClusterAssignment) -> Vec<f64> {
    let mut powers: Vec<f64> = assignment.clusters.iter().map(|c| c.iter().map(|&i| mpcs[i].power()).sum()).collect();
    powers.extend(assignment.noise().into_iter().map(|i| mpcs[i].power()));
    powers
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiFit {
    pub n: f64,
    pub sf_sigma_db: f64,
    pub d0: f64,
    pub f0: f64,
}

impl CiFit {
    /// Positive path loss predicted at distance `d`.
    pub fn path_loss(&self, d: f64) -> f64 {
        -fspl(self.f0, self.d0).expect("valid fit") + 10.0 * self.n * (d / self.d0).log10()
    }
}

/// Single-slope close-in fit with the intercept pinned to the free-space
/// loss at 1 m. Samples are `(distance m, positive path loss dB)`.
pub fn fit_ci(samples: &[(f64, f64)], f0: f64) -> Result<CiFit> {
    const D0: f64 = 1.0;
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(s) = samples.iter().find(|s| !(s.0 > D0) || !s.1.is_finite()) {
        return Err(Error::invalid(format!("sample {s:?} must have distance > {D0} m and finite loss")));
    }
    let first = samples[0].0;
    if samples.iter().all(|s| s.0 == first) {
        return Err(Error::DegenerateAbscissa);
    }
    let anchor = -fspl(f0, D0)?;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(d, pl) in samples {
        let x = 10.0 * (d / D0).log10();
        sxx += x * x;
        sxy += x * (pl - anchor);
    }
    let n = sxy / sxx;
    let ss: f64 = samples.iter().map(|&(d, pl)| (pl - anchor - n * 10.0 * (d / D0).log10()).powi(2)).sum();
    Ok(CiFit { n, sf_sigma_db: (ss / samples.len() as f64).sqrt(), d0: D0, f0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationConfig {
    pub threshold: bool,
    pub range_db: f64,
    pub noise_floor_db: f64,
    pub dbscan: DbscanConfig,
}

impl Default for CharacterizationConfig {
    fn default() -> Self {
        Self {
            threshold: true,
            range_db: DEFAULT_DYNAMIC_RANGE_DB,
            noise_floor_db: DEFAULT_NOISE_FLOOR_DB,
            dbscan: DbscanConfig::default(),
        }
    }
}

/// One metrics row. Spreads and K-factor are `None` in outage; K-factor is
/// also `None` with fewer than two clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub realization_id: usize,
    pub state: LinkState,
    pub pl_db: f64,
    pub ds_s: Option<f64>,
    pub asa_deg: Option<f64>,
    pub esa_deg: Option<f64>,
    pub kf_db: Option<f64>,
    pub n_clusters: usize,
}

pub fn characterize(id: usize, state: LinkState, mpcs: &[Mpc], cfg: &CharacterizationConfig) -> Result<Metrics> {
    if mpcs.is_empty() {
        return Ok(Metrics {
            realization_id: id,
            state,
            pl_db: f64::INFINITY,
            ds_s: None,
            asa_deg: None,
            esa_deg: None,
            kf_db: None,
            n_clusters: 0,
        });
    }
    let pl_db = -10.0 * mpcs.iter().map(Mpc::power).sum::<f64>().log10();
    let kept = if cfg.threshold { apply_dynamic_range(mpcs, cfg.range_db, cfg.noise_floor_db)? } else { mpcs.to_vec() };
    let assignment = cluster_mcd_dbscan(&kept, &cfg.dbscan);
    let powers = cluster_powers(&kept, &assignment);
    Ok(Metrics {
        realization_id: id,
        state,
        pl_db,
        ds_s: Some(rms_delay_spread(&kept)?),
        asa_deg: Some(angular_spread(&kept, AngleDimension::AoaAz)?),
        esa_deg: Some(angular_spread(&kept, AngleDimension::AoaEl)?),
        kf_db: k_factor(&powers).ok(),
        n_clusters: powers.len(),
    })
}

pub fn characterize_realization(id: usize, real: &ChannelRealization, cfg: &CharacterizationConfig) -> Result<Metrics> {
    characterize(id, real.state, &real.mpcs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Direction;
    use crate::synthesis::MpcOrigin;

    fn mpc(gain_db: f64, delay: f64, az: f64, el: f64) -> Mpc {
        let d = Direction::new(az, el);
        Mpc { origin: MpcOrigin::Stochastic, gain_db, phase: 0.0, delay, aod: d, aoa: d }
    }

    #[test]
    fn dynamic_range_branches() {
        let one = [mpc(-100.0, 0.0, 0.0, 0.0)];
        assert_eq!(apply_dynamic_range(&one, 30.0, -180.5).unwrap().len(), 1);
        let a = [mpc(-100.0, 0.0, 0.0, 0.0), mpc(-129.9, 0.0, 0.0, 0.0), mpc(-130.1, 0.0, 0.0, 0.0)];
        assert_eq!(apply_dynamic_range(&a, 30.0, -180.5).unwrap().len(), 2);
        let b = [mpc(-155.0, 0.0, 0.0, 0.0), mpc(-160.4, 0.0, 0.0, 0.0), mpc(-160.6, 0.0, 0.0, 0.0)];
        assert_eq!(apply_dynamic_range(&b, 30.0, -180.5).unwrap().len(), 2);
        let weak = [mpc(-170.0, 0.0, 0.0, 0.0)];
        assert_eq!(apply_dynamic_range(&weak, 30.0, -180.5).unwrap().len(), 1);
        assert!(apply_dynamic_range(&[], 30.0, -180.5).is_err());
    }

    #[test]
    fn delay_spread_examples() {
        assert_eq!(rms_delay_spread(&[mpc(-80.0, 3e-9, 0.0, 0.0)]).unwrap(), 0.0);
        let two = [mpc(-80.0, 0.0, 0.0, 0.0), mpc(-80.0, 10e-9, 0.0, 0.0)];
        assert!((rms_delay_spread(&two).unwrap() - 5e-9).abs() < 1e-18);
    }

    #[test]
    fn angular_spread_examples() {
        let two = [mpc(-80.0, 0.0, 10.0, 0.0), mpc(-80.0, 0.0, -10.0, 0.0)];
        assert!((angular_spread(&two, AngleDimension::AoaAz).unwrap() - 10.0).abs() < 1e-9);
        // straddling the seam
        let seam = [mpc(-80.0, 0.0, 175.0, 0.0), mpc(-80.0, 0.0, -175.0, 0.0)];
        assert!((angular_spread(&seam, AngleDimension::AoaAz).unwrap() - 5.0).abs() < 1e-9);
        assert!((circular_spread(&[10.0, 370.0 - 20.0], &[1.0, 1.0]) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn k_factor_examples() {
        assert!((k_factor(&[10.0, 1.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(k_factor(&[2.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(k_factor(&[1.0]), Err(Error::InsufficientClusters(1))));
    }

    #[test]
    fn dbscan_two_groups() {
        let mut mpcs = Vec::new();
        for k in 0..10 {
            let j = k as f64 * 0.1;
            mpcs.push(mpc(-90.0, 100e-9 + j * 1e-10, 0.0 + j, 0.0));
            mpcs.push(mpc(-90.0, 200e-9 + j * 1e-10, 90.0 + j, 0.0));
        }
        let a = cluster_mcd_dbscan(&mpcs, &DbscanConfig::default());
        assert_eq!(a.n_clusters(), 2);
        assert!(a.noise().is_empty());
        assert_eq!(a.clusters[0].len(), 10);

        let same = vec![mpc(-90.0, 1e-9, 5.0, 5.0); 4];
        assert_eq!(cluster_mcd_dbscan(&same, &DbscanConfig::default()).n_clusters(), 1);

        let pair = [mpc(-90.0, 0.0, 0.0, 0.0), mpc(-90.0, 50e-9, 120.0, 0.0)];
        let a = cluster_mcd_dbscan(&pair, &DbscanConfig::default());
        assert_eq!(a.n_clusters(), 0);
        assert_eq!(a.noise(), vec![0, 1]);
    }

    #[test]
    fn ci_fit_examples() {
        let f0 = 220e9;
        let anchor = -fspl(f0, 1.0).unwrap();
        let samples: Vec<_> = [5.0, 20.0, 80.0, 300.0].iter().map(|&d| (d, anchor + 20.0 * f64::log10(d))).collect();
        let fit = fit_ci(&samples, f0).unwrap();
        assert!((fit.n - 2.0).abs() < 1e-9 && fit.sf_sigma_db < 1e-9);
        assert!(matches!(fit_ci(&[(10.0, 100.0), (10.0, 101.0)], f0), Err(Error::DegenerateAbscissa)));
    }
}
