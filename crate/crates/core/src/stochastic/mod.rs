//! Non-dominant cluster generation in the style of a geometry-based
//! stochastic channel model.
//!
//! Large-scale parameters are drawn per realization. Cluster delays are
//! exponential, cluster powers decay exponentially with delay, centroid
//! angles scatter around the dominant direction, and each cluster carries a
//! fixed table of 20 equal-power rays. Delays and angles are then rescaled
//! so the generated set realizes the drawn spreads.

pub mod params;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

pub use params::{load_params, parse_params, LinkState, StateParamSet, StateParams};

use crate::characterization::{circular_spread, weighted_delay_spread};
use crate::geometry::Direction;

pub const RAYS_PER_CLUSTER: usize = 20;

/// Normalized intra-cluster angle offsets, unit RMS.
pub const RAY_OFFSETS: [f64; RAYS_PER_CLUSTER] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797, -0.6797, 0.8844,
    -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Ratio of delay standard deviation to delay spread for cluster delays.
    pub delay_scaling: f64,
    /// Per-cluster shadowing, dB.
    pub cluster_shadowing_db: f64,
    /// Departure-side angular scatter relative to the arrival side.
    pub departure_spread_ratio: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { delay_scaling: 2.5, cluster_shadowing_db: 3.0, departure_spread_ratio: 0.5 }
    }
}

/// One draw of the large-scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspDraw {
    pub kf_db: f64,
    /// Seconds.
    pub ds: f64,
    pub asa: f64,
    pub esa: f64,
    pub n_clusters: usize,
    /// Intra-cluster spreads carried over from the state parameters.
    pub cds: f64,
    pub casa: f64,
    pub cesa: f64,
}

pub fn draw_lsp_with<R: Rng + ?Sized>(params: &StateParams, rng: &mut R) -> LspDraw {
    let mut gauss = || -> f64 { StandardNormal.sample(rng) };
    let kf_db = params.kf_mu_db + params.kf_sigma_db * gauss();
    let ds = params.ds_median() * 10f64.powf(params.ds_sigma_log10 * gauss());
    let asa = params.asa_median_deg * 10f64.powf(params.asa_sigma_log10 * gauss());
    let esa = params.esa_median_deg * 10f64.powf(params.esa_sigma_log10 * gauss());
    // at least one cluster whenever the mean allows it
    let (offset, lambda) =
        if params.mean_clusters >= 1.0 { (1, params.mean_clusters - 1.0) } else { (0, params.mean_clusters) };
    let extra = if lambda > 0.0 { Poisson::new(lambda).expect("positive rate").sample(rng) as usize } else { 0 };
    LspDraw {
        kf_db,
        ds,
        asa,
        esa,
        n_clusters: offset + extra,
        cds: params.cds(),
        casa: params.casa_deg,
        cesa: params.cesa_deg,
    }
}

pub fn draw_lsp(params: &StateParams, seed: u64) -> LspDraw {
    draw_lsp_with(params, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Seconds after the cluster's excess delay.
    pub delay_offset: f64,
    /// (azimuth, elevation) offsets from the cluster centroid, degrees.
    pub aoa_offset: (f64, f64),
    pub aod_offset: (f64, f64),
    pub power_fraction: f64,
    /// Radians in [0, 2 pi).
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticCluster {
    pub excess_delay: f64,
    pub power_fraction: f64,
    pub aoa: Direction,
    pub aod: Direction,
    pub rays: Vec<Ray>,
}

impl StochasticCluster {
    pub fn ray_aoa(&self, ray: &Ray) -> Direction {
        offset_direction(self.aoa, ray.aoa_offset)
    }

    pub fn ray_aod(&self, ray: &Ray) -> Direction {
        offset_direction(self.aod, ray.aod_offset)
    }

    pub fn ray_delay(&self, ray: &Ray) -> f64 {
        self.excess_delay + ray.delay_offset
    }
}

fn offset_direction(center: Direction, (daz, del): (f64, f64)) -> Direction {
    Direction::new(center.azimuth + daz, center.elevation + del)
}

/// Unscaled geometry of one realization; spreads are fitted afterwards by
/// choosing the inter- and intra-cluster scale factors.
struct Draft {
    delays: Vec<f64>,
    powers: Vec<f64>,
    centroid_az: Vec<f64>,
    centroid_el: Vec<f64>,
    depart_az: Vec<f64>,
    depart_el: Vec<f64>,
    ray_delay: Vec<[f64; RAYS_PER_CLUSTER]>,
    ray_el_perm: Vec<[usize; RAYS_PER_CLUSTER]>,
    ray_phase: Vec<[f64; RAYS_PER_CLUSTER]>,
}

impl Draft {
    fn weights(&self) -> Vec<f64> {
        self.powers.iter().flat_map(|p| std::iter::repeat_n(p / RAYS_PER_CLUSTER as f64, RAYS_PER_CLUSTER)).collect()
    }

    fn ray_delays(&self, inter: f64, intra: f64) -> Vec<f64> {
        self.delays
            .iter()
            .zip(&self.ray_delay)
            .flat_map(|(d, rays)| rays.iter().map(move |r| inter * d + intra * r))
            .collect()
    }

    fn ray_angles(&self, center: f64, centroids: &[f64], inter: f64, intra: f64, el_perm: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(centroids.len() * RAYS_PER_CLUSTER);
        for (n, c) in centroids.iter().enumerate() {
            for m in 0..RAYS_PER_CLUSTER {
                let k = if el_perm { self.ray_el_perm[n][m] } else { m };
                out.push(center + inter * c + intra * RAY_OFFSETS[k]);
            }
        }
        out
    }
}

/// Positive root `s` of `std(s * a + b) = target` for weighted samples.
fn solve_delay_scale(a: &[f64], b: &[f64], w: &[f64], target: f64) -> Option<f64> {
    let total: f64 = w.iter().sum();
    let mean = |v: &[f64]| v.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let (ma, mb) = (mean(a), mean(b));
    let mut var_a = 0.0;
    let mut cov = 0.0;
    let mut var_b = 0.0;
    for ((x, y), wi) in a.iter().zip(b).zip(w) {
        var_a += wi * (x - ma) * (x - ma);
        cov += wi * (x - ma) * (y - mb);
        var_b += wi * (y - mb) * (y - mb);
    }
    let (var_a, cov, var_b) = (var_a / total, cov / total, var_b / total);
    if var_a <= 1e-30 || var_b > target * target {
        return None;
    }
    let disc = cov * cov - var_a * (var_b - target * target);
    Some(((-cov + disc.max(0.0).sqrt()) / var_a).max(0.0))
}

/// Bisection for the scale in `[0, hi]` at which `spread(scale)` reaches
/// `target`; `spread` is assumed nondecreasing near the root.
fn bisect_scale(target: f64, hi: f64, spread: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    if spread(hi) <= target {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if spread(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inter- and intra-cluster angle scales realizing `target` spread.
fn fit_angle_scales(
    target: f64,
    intra_nominal: f64,
    spread_of: impl Fn(f64, f64) -> f64,
    single_cluster: bool,
) -> (f64, f64) {
    let intra_only = spread_of(0.0, intra_nominal);
    if single_cluster || intra_only >= target {
        let upper = if intra_nominal > 0.0 { 4.0 * target.max(intra_nominal) } else { 4.0 * target };
        let intra = bisect_scale(target, upper.max(1e-9), |k| spread_of(0.0, k));
        return (0.0, intra);
    }
    let inter = bisect_scale(target, 20.0 * target.max(1.0), |s| spread_of(s, intra_nominal));
    (inter, intra_nominal)
}

pub fn generate_clusters_with<R: Rng + ?Sized>(
    lsp: &LspDraw,
    dominant: (Direction, Direction),
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Vec<StochasticCluster> {
    let n = lsp.n_clusters;
    if n == 0 {
        return Vec::new();
    }
    let (dom_aod, dom_aoa) = dominant;

    // exponential delays, shifted to start at zero and sorted
    let mut delays: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            cfg.delay_scaling * lsp.ds * e
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    let first = delays[0];
    delays.iter_mut().for_each(|d| *d -= first);

    let shadow = Normal::new(0.0, cfg.cluster_shadowing_db).expect("non-negative shadowing");
    let decay = (cfg.delay_scaling - 1.0) / (cfg.delay_scaling * lsp.ds);
    let mut powers: Vec<f64> =
        delays.iter().map(|d| (-d * decay).exp() * 10f64.powf(-shadow.sample(rng) / 10.0)).collect();
    let total: f64 = powers.iter().sum();
    powers.iter_mut().for_each(|p| *p /= total);

    let gauss = |r: &mut R| -> f64 { StandardNormal.sample(r) };
    let centroid_az: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let centroid_el: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let depart_az: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let depart_el: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();

    let mut ray_delay = Vec::with_capacity(n);
    let mut ray_el_perm = Vec::with_capacity(n);
    let mut ray_phase = Vec::with_capacity(n);
    for _ in 0..n {
        let mut d = [0.0; RAYS_PER_CLUSTER];
        let mut ph = [0.0; RAYS_PER_CLUSTER];
        for m in 0..RAYS_PER_CLUSTER {
            d[m] = rng.random::<f64>() * 2.0;
            ph[m] = rng.random::<f64>() * std::f64::consts::TAU;
        }
        let mut perm: [usize; RAYS_PER_CLUSTER] = std::array::from_fn(|i| i);
        perm.shuffle(rng);
        ray_delay.push(d);
        ray_el_perm.push(perm);
        ray_phase.push(ph);
    }
    let draft =
        Draft { delays, powers, centroid_az, centroid_el, depart_az, depart_el, ray_delay, ray_el_perm, ray_phase };
    let weights = draft.weights();
    let single = n == 1;

    // delays: intra-cluster offsets nominally uniform on [0, 2 cds]
    let raw_inter = draft.ray_delays(1.0, 0.0);
    let raw_intra = draft.ray_delays(0.0, lsp.cds);
    let (delay_inter, delay_intra) = match (single, solve_delay_scale(&raw_inter, &raw_intra, &weights, lsp.ds)) {
        (false, Some(s)) => (s, lsp.cds),
        _ => {
            let unit = draft.ray_delays(0.0, 1.0);
            let spread = weighted_delay_spread(&unit, &weights);
            (0.0, if spread > 0.0 { lsp.ds / spread } else { 0.0 })
        }
    };

    let az_spread = |inter: f64, intra: f64| {
        circular_spread(&draft.ray_angles(0.0, &draft.centroid_az, inter, intra, false), &weights)
    };
    let (az_inter, az_intra) = fit_angle_scales(lsp.asa, lsp.casa, az_spread, single);
    let el_spread = |inter: f64, intra: f64| {
        let el: Vec<f64> = draft
            .ray_angles(dom_aoa.elevation, &draft.centroid_el, inter, intra, true)
            .into_iter()
            .map(|e| e.clamp(-90.0, 90.0))
            .collect();
        circular_spread(&el, &weights)
    };
    let (el_inter, el_intra) = fit_angle_scales(lsp.esa, lsp.cesa, el_spread, single);
    let ratio = cfg.departure_spread_ratio;

    (0..n)
        .map(|c| {
            let rays = (0..RAYS_PER_CLUSTER)
                .map(|m| {
                    let k = draft.ray_el_perm[c][m];
                    Ray {
                        delay_offset: delay_intra * draft.ray_delay[c][m],
                        aoa_offset: (az_intra * RAY_OFFSETS[m], el_intra * RAY_OFFSETS[k]),
                        aod_offset: (ratio * az_intra * RAY_OFFSETS[m], ratio * el_intra * RAY_OFFSETS[k]),
                        power_fraction: 1.0 / RAYS_PER_CLUSTER as f64,
                        phase: draft.ray_phase[c][m],
                    }
                })
                .collect();
            StochasticCluster {
                excess_delay: delay_inter * draft.delays[c],
                power_fraction: draft.powers[c],
                aoa: Direction::new(
                    dom_aoa.azimuth + az_inter * draft.centroid_az[c],
                    dom_aoa.elevation + el_inter * draft.centroid_el[c],
                ),
                aod: Direction::new(
                    dom_aod.azimuth + ratio * az_inter * draft.depart_az[c],
                    dom_aod.elevation + ratio * el_inter * draft.depart_el[c],
                ),
                rays,
            }
        })
        .collect()
}

pub fn generate_clusters(
    lsp: &LspDraw,
    dominant: (Direction, Direction),
    cfg: &GeneratorConfig,
    seed: u64,
) -> Vec<StochasticCluster> {
    generate_clusters_with(lsp, dominant, cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}
