//! Channel assembly: dominant paths from the ray tracer, adjusted by the
//! foliage twin, merged with stochastic non-dominant clusters.

use log::warn;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliage::{compute_fcr, FoliageTwin};
use crate::geometry::{Direction, Vec3};
use crate::raytrace::{geometric_los, trace_first_order, PathKind};
use crate::scene::Scene;
use crate::seed::derive_seed;
use crate::stochastic::{draw_lsp, generate_clusters, GeneratorConfig, LinkState, StateParamSet};

/// Sounder-style delay bin: 1 / 1.536 GHz.
pub const DEFAULT_TAP_SPACING: f64 = 1.0 / 1.536e9;
pub const DEFAULT_N_TAPS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcOrigin {
    Los,
    Reflection,
    Stochastic,
}

impl MpcOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            MpcOrigin::Los => "los",
            MpcOrigin::Reflection => "reflection",
            MpcOrigin::Stochastic => "stochastic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(MpcOrigin::Los),
            "reflection" => Ok(MpcOrigin::Reflection),
            "stochastic" => Ok(MpcOrigin::Stochastic),
            other => Err(Error::Parse(format!("unknown MPC origin `{other}`"))),
        }
    }

    pub fn is_dominant(self) -> bool {
        self != MpcOrigin::Stochastic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    pub origin: MpcOrigin,
    /// Path gain, dB.
    pub gain_db: f64,
    /// Radians in [0, 2 pi).
    pub phase: f64,
    /// Absolute propagation delay, seconds.
    pub delay: f64,
    pub aod: Direction,
    pub aoa: Direction,
}

impl Mpc {
    pub fn power(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(10f64.powf(self.gain_db / 20.0), self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub mpcs: Vec<Mpc>,
    pub state: LinkState,
    pub tx: Vec3,
    pub rx: Vec3,
    pub frequency: f64,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn outage(tx: Vec3, rx: Vec3, frequency: f64, seed: u64) -> Self {
        Self { mpcs: Vec::new(), state: LinkState::Outage, tx, rx, frequency, seed }
    }

    pub fn total_power(&self) -> f64 {
        self.mpcs.iter().map(Mpc::power).sum()
    }

    /// Positive path loss over all MPCs, dB; infinite in outage.
    pub fn path_loss_db(&self) -> f64 {
        -10.0 * self.total_power().log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub stochastic: bool,
    /// Draw the Gaussian foliage term for foliage-exposed paths.
    pub foliage_chi: bool,
    /// MPCs arriving later than this are discarded, seconds.
    pub max_delay: f64,
    pub generator: GeneratorConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { stochastic: true, foliage_chi: true, max_delay: 10e-6, generator: GeneratorConfig::default() }
    }
}

impl SynthesisConfig {
    pub fn deterministic() -> Self {
        Self { stochastic: false, foliage_chi: false, ..Self::default() }
    }
}

/// Phase of a path with the given delay, radians in [0, 2 pi).
pub fn electrical_phase(frequency: f64, delay: f64) -> f64 {
    // reduce the cycle count first to keep precision at long delays
    let cycles = (frequency * delay).fract();
    (-std::f64::consts::TAU * cycles).rem_euclid(std::f64::consts::TAU)
}

const SEED_CHI: u64 = 0;
const SEED_LSP: u64 = 1;
const SEED_CLUSTERS: u64 = 2;

/// One channel realization between the scene transmitter and `rx`.
pub fn assemble(
    scene: &Scene,
    twin: &FoliageTwin,
    params: &StateParamSet,
    rx: Vec3,
    seed: u64,
    cfg: &SynthesisConfig,
) -> Result<ChannelRealization> {
    let los = geometric_los(scene, rx)?;
    let candidates = trace_first_order(scene, rx);
    if candidates.is_empty() {
        return Ok(ChannelRealization::outage(scene.tx, rx, scene.frequency, seed));
    }

    let model = &twin.loss_model;
    let mut chi_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SEED_CHI));
    let mut los_fcr = None;
    let mut mpcs = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let fcr = compute_fcr(twin, c.aod, model.phi_th_deg)?;
        if c.kind == PathKind::Los {
            los_fcr = Some(fcr);
        }
        let chi = (cfg.foliage_chi && fcr > 0.0).then(|| model.draw_chi(&mut chi_rng));
        let adjust = model.deterministic(fcr) + chi.unwrap_or(0.0);
        mpcs.push(Mpc {
            origin: match c.kind {
                PathKind::Los => MpcOrigin::Los,
                PathKind::Reflection => MpcOrigin::Reflection,
            },
            gain_db: c.gain_db + adjust,
            phase: electrical_phase(scene.frequency, c.delay),
            delay: c.delay,
            aod: c.aod,
            aoa: c.aoa,
        });
    }

    let state = match (los.is_clear(), los_fcr) {
        (true, Some(f)) if f >= model.r_th => LinkState::Olos,
        (true, Some(_)) => LinkState::Los,
        _ => LinkState::Nlos,
    };

    if cfg.stochastic {
        let state_params = params.get(state).expect("non-outage state");
        let lsp = draw_lsp(state_params, derive_seed(seed, SEED_LSP));
        let strongest =
            mpcs.iter().max_by(|a, b| a.gain_db.total_cmp(&b.gain_db)).copied().expect("at least one dominant path");
        let first_arrival = mpcs.iter().map(|m| m.delay).fold(f64::INFINITY, f64::min);
        let clusters =
            generate_clusters(&lsp, (strongest.aod, strongest.aoa), &cfg.generator, derive_seed(seed, SEED_CLUSTERS));
        let stochastic_power = strongest.power() / 10f64.powf(lsp.kf_db / 10.0);
        for cluster in &clusters {
            for ray in &cluster.rays {
                let power = stochastic_power * cluster.power_fraction * ray.power_fraction;
                mpcs.push(Mpc {
                    origin: MpcOrigin::Stochastic,
                    gain_db: 10.0 * power.log10(),
                    phase: ray.phase,
                    delay: first_arrival + cluster.ray_delay(ray),
                    aod: cluster.ray_aod(ray),
                    aoa: cluster.ray_aoa(ray),
                });
            }
        }
    }

    let before = mpcs.len();
    mpcs.retain(|m| m.delay <= cfg.max_delay);
    if mpcs.len() < before {
        warn!("dropped {} MPCs beyond the {:.3e} s delay window", before - mpcs.len(), cfg.max_delay);
    }
    if mpcs.is_empty() {
        return Ok(ChannelRealization::outage(scene.tx, rx, scene.frequency, seed));
    }
    Ok(ChannelRealization { mpcs, state, tx: scene.tx, rx, frequency: scene.frequency, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub taps: Vec<Complex64>,
    pub tap_spacing: f64,
}

impl Cir {
    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn delay_of(&self, bin: usize) -> f64 {
        bin as f64 * self.tap_spacing
    }
}

/// Nearest-bin CIR. Delays past the window wrap around circularly.
pub fn sample_cir(real: &ChannelRealization, tap_spacing: f64, n_taps: usize) -> Result<Cir> {
    if real.state == LinkState::Outage {
        return Err(Error::Outage);
    }
    if !(tap_spacing > 0.0) || n_taps == 0 {
        return Err(Error::invalid("tap spacing and tap count must be positive"));
    }
    let mut taps = vec![Complex64::new(0.0, 0.0); n_taps];
    let mut wrapped = 0usize;
    for m in &real.mpcs {
        let bin = (m.delay / tap_spacing).round() as usize;
        if bin >= n_taps {
            wrapped += 1;
        }
        taps[bin % n_taps] += m.amplitude();
    }
    if wrapped > 0 {
        warn!("{wrapped} MPCs beyond the {:.1} ns CIR window wrapped", (n_taps - 1) as f64 * tap_spacing * 1e9);
    }
    Ok(Cir { taps, tap_spacing })
}

/// Per-MPC power delay profile sorted by delay: `(delay s, power dB)`.
pub fn pdp(real: &ChannelRealization) -> Result<Vec<(f64, f64)>> {
    if real.state == LinkState::Outage {
        return Err(Error::Outage);
    }
    let mut out: Vec<_> = real.mpcs.iter().map(|m| (m.delay, m.gain_db)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliage::AngularMask;
    use crate::geometry::SPEED_OF_LIGHT;
    use crate::raytrace::fspl;
    use crate::scene::Building;

    fn open() -> Scene {
        Scene::free_space(Vec3::new(0.0, 0.0, 16.6), 220e9)
    }

    #[test]
    fn free_space_single_los() {
        let twin = FoliageTwin::clear(1.0).unwrap();
        let rx = Vec3::new(50.0, 0.0, 16.6);
        let r = assemble(&open(), &twin, &StateParamSet::campaign(), rx, 1, &SynthesisConfig::default()).unwrap();
        let los: Vec<_> = r.mpcs.iter().filter(|m| m.origin == MpcOrigin::Los).collect();
        assert_eq!(los.len(), 1);
        assert_eq!(los[0].gain_db, fspl(220e9, 50.0).unwrap());
        assert!((los[0].delay - 50.0 / SPEED_OF_LIGHT).abs() < 1e-18);
        assert_eq!(r.state, LinkState::Los);

        let d = assemble(&open(), &twin, &StateParamSet::campaign(), rx, 1, &SynthesisConfig::deterministic()).unwrap();
        assert_eq!(d.mpcs.len(), 1);
    }

    #[test]
    fn full_foliage_is_olos() {
        let twin = FoliageTwin::from_mask(AngularMask::from_fn(1.0, |_| true).unwrap());
        let rx = Vec3::new(0.0, 80.0, 1.6);
        let r = assemble(&open(), &twin, &StateParamSet::campaign(), rx, 1, &SynthesisConfig::deterministic()).unwrap();
        assert_eq!(r.state, LinkState::Olos);
        let expected = fspl(220e9, open().tx.distance(rx)).unwrap() - 19.89;
        assert!((r.mpcs[0].gain_db - expected).abs() < 1e-9);
    }

    #[test]
    fn enclosed_rx_is_outage() {
        let mut scene = open();
        scene.buildings = vec![
            Building::rectangle([90.0, -20.0], [92.0, 20.0], 30.0),
            Building::rectangle([108.0, -20.0], [110.0, 20.0], 30.0),
            Building::rectangle([90.0, -22.0], [110.0, -20.0], 30.0),
            Building::rectangle([90.0, 20.0], [110.0, 22.0], 30.0),
        ];
        let twin = FoliageTwin::clear(1.0).unwrap();
        let r = assemble(
            &scene,
            &twin,
            &StateParamSet::campaign(),
            Vec3::new(100.0, 0.0, 1.6),
            3,
            &SynthesisConfig::default(),
        )
        .unwrap();
        assert_eq!(r.state, LinkState::Outage);
        assert!(r.mpcs.is_empty());
        assert!(sample_cir(&r, DEFAULT_TAP_SPACING, DEFAULT_N_TAPS).is_err());
    }

    #[test]
    fn stochastic_power_anchored_to_kf() {
        let twin = FoliageTwin::clear(1.0).unwrap();
        let params = StateParamSet::campaign();
        let r = assemble(&open(), &twin, &params, Vec3::new(120.0, 40.0, 1.6), 9, &SynthesisConfig::default()).unwrap();
        let strongest = r.mpcs.iter().filter(|m| m.origin.is_dominant()).map(Mpc::power).fold(0.0, f64::max);
        let stoch: f64 = r.mpcs.iter().filter(|m| !m.origin.is_dominant()).map(Mpc::power).sum();
        let lsp = draw_lsp(&params.los, derive_seed(9, SEED_LSP));
        let expected = strongest / 10f64.powf(lsp.kf_db / 10.0);
        assert!((stoch / expected - 1.0).abs() < 1e-9);
        let first = r.mpcs[0].delay;
        assert!(r.mpcs.iter().all(|m| m.delay >= first));
    }

    fn realization(mpcs: Vec<Mpc>) -> ChannelRealization {
        ChannelRealization {
            mpcs,
            state: LinkState::Los,
            tx: Vec3::default(),
            rx: Vec3::new(1.0, 0.0, 0.0),
            frequency: 220e9,
            seed: 0,
        }
    }

    fn mpc(gain_db: f64, phase: f64, delay: f64) -> Mpc {
        let d = Direction::new(0.0, 0.0);
        Mpc { origin: MpcOrigin::Los, gain_db, phase, delay, aod: d, aoa: d }
    }

    #[test]
    fn cir_binning() {
        let cir = sample_cir(&realization(vec![mpc(0.0, 0.0, 0.0)]), DEFAULT_TAP_SPACING, DEFAULT_N_TAPS).unwrap();
        assert!((cir.taps[0].norm() - 1.0).abs() < 1e-15);
        assert!(cir.taps[1..].iter().all(|t| t.norm() == 0.0));

        let pair = realization(vec![mpc(-3.0, 0.0, 10e-9), mpc(-3.0, std::f64::consts::PI, 10.02e-9)]);
        let cir = sample_cir(&pair, DEFAULT_TAP_SPACING, DEFAULT_N_TAPS).unwrap();
        assert!(cir.taps.iter().all(|t| t.norm() < 1e-12));

        let window = (DEFAULT_N_TAPS - 1) as f64 * DEFAULT_TAP_SPACING;
        let late = sample_cir(&realization(vec![mpc(0.0, 0.0, 1400e-9)]), DEFAULT_TAP_SPACING, DEFAULT_N_TAPS).unwrap();
        let expected = ((1400e-9 - window) / DEFAULT_TAP_SPACING).round() as usize - 1;
        let hit = late.taps.iter().position(|t| t.norm() > 0.0).unwrap();
        assert!(hit.abs_diff(expected) <= 1, "{hit} vs {expected}");
    }

    #[test]
    fn pdp_sorted_and_conserving() {
        let r = realization(vec![mpc(-10.0, 0.0, 5e-9), mpc(-20.0, 0.0, 1e-9)]);
        let p = pdp(&r).unwrap();
        assert_eq!(p, vec![(1e-9, -20.0), (5e-9, -10.0)]);
        let sum: f64 = p.iter().map(|x| 10f64.powf(x.1 / 10.0)).sum();
        assert_eq!(sum, r.total_power());
    }

    #[test]
    fn phases_in_range() {
        for d in [0.0, 1e-9, 1.234567e-6] {
            let p = electrical_phase(220e9, d);
            assert!((0.0..std::f64::consts::TAU).contains(&p));
        }
    }
}
