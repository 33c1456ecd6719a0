//! Channel model variants behind a common trait, looked up by name.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::foliage::FoliageTwin;
use crate::geometry::{Direction, Vec3};
use crate::raytrace::{fspl, trace_first_order, PathKind};
use crate::scene::Scene;
use crate::seed::derive_seed;
use crate::stochastic::{draw_lsp, generate_clusters, LinkState, StateParamSet};
use crate::synthesis::{assemble, electrical_phase, ChannelRealization, Mpc, MpcOrigin, SynthesisConfig};

/// Everything a model may consult besides the receiver and seed.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    pub scene: &'a Scene,
    pub twin: &'a FoliageTwin,
    pub params: &'a StateParamSet,
    pub synthesis: SynthesisConfig,
}

pub trait ChannelModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn realize(&self, ctx: &ModelContext<'_>, rx: Vec3, seed: u64) -> Result<ChannelRealization>;
}

/// Ray-traced dominant paths with foliage loss plus stochastic clusters.
pub struct Dtecm;

impl ChannelModel for Dtecm {
    fn name(&self) -> &'static str {
        "dtecm"
    }

    fn description(&self) -> &'static str {
        "ray-traced dominant paths, foliage twin loss, stochastic clusters"
    }

    fn realize(&self, ctx: &ModelContext<'_>, rx: Vec3, seed: u64) -> Result<ChannelRealization> {
        assemble(ctx.scene, ctx.twin, ctx.params, rx, seed, &ctx.synthesis)
    }
}

/// Dominant paths only, ignoring foliage.
pub struct RayTracing;

impl ChannelModel for RayTracing {
    fn name(&self) -> &'static str {
        "raytrace"
    }

    fn description(&self) -> &'static str {
        "ray-traced dominant paths without foliage or stochastic clusters"
    }

    fn realize(&self, ctx: &ModelContext<'_>, rx: Vec3, seed: u64) -> Result<ChannelRealization> {
        let clear = FoliageTwin::clear(ctx.twin.mask.resolution())?;
        let cfg = SynthesisConfig { max_delay: ctx.synthesis.max_delay, ..SynthesisConfig::deterministic() };
        assemble(ctx.scene, &clear, ctx.params, rx, seed, &cfg)
    }
}

/// A single free-space path, buildings ignored.
pub struct FreeSpace;

impl ChannelModel for FreeSpace {
    fn name(&self) -> &'static str {
        "free-space"
    }

    fn description(&self) -> &'static str {
        "line-of-sight free-space path, geometry ignored"
    }

    fn realize(&self, ctx: &ModelContext<'_>, rx: Vec3, seed: u64) -> Result<ChannelRealization> {
        let open = Scene::free_space(ctx.scene.tx, ctx.scene.frequency);
        let path = trace_first_order(&open, rx);
        let Some(p) = path.first().filter(|p| p.kind == PathKind::Los) else {
            return Err(Error::invalid("rx coincides with tx"));
        };
        let mpc = Mpc {
            origin: MpcOrigin::Los,
            gain_db: p.gain_db,
            phase: electrical_phase(ctx.scene.frequency, p.delay),
            delay: p.delay,
            aod: p.aod,
            aoa: p.aoa,
        };
        Ok(ChannelRealization {
            mpcs: vec![mpc],
            state: LinkState::Los,
            tx: ctx.scene.tx,
            rx,
            frequency: ctx.scene.frequency,
            seed,
        })
    }
}

/// Line-of-sight probability of the urban-macro scenario for receivers at
/// or below 13 m.
pub fn uma_los_probability(d2d: f64) -> f64 {
    if d2d <= 18.0 {
        1.0
    } else {
        18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d)
    }
}

/// Purely statistical baseline: LoS/NLoS drawn from the distance-based
/// probability, close-in path loss with log-normal shadowing, stochastic
/// clusters around the geometric direction.
pub struct Statistical;

impl ChannelModel for Statistical {
    fn name(&self) -> &'static str {
        "statistical"
    }

    fn description(&self) -> &'static str {
        "close-in path loss with LoS probability and stochastic clusters"
    }

    fn realize(&self, ctx: &ModelContext<'_>, rx: Vec3, seed: u64) -> Result<ChannelRealization> {
        let tx = ctx.scene.tx;
        let f = ctx.scene.frequency;
        if rx == tx {
            return Err(Error::invalid("rx coincides with tx"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let d2d = (rx.x - tx.x).hypot(rx.y - tx.y);
        let los = rand::Rng::random::<f64>(&mut rng) < uma_los_probability(d2d);
        let state = if los { LinkState::Los } else { LinkState::Nlos };
        let p = ctx.params.get(state).expect("non-outage state");
        let d3d = tx.distance(rx).max(1.0);
        let shadow = Normal::new(0.0, p.sf_sigma_db).expect("non-negative sigma").sample(&mut rng);
        let gain_db = fspl(f, 1.0)? - 10.0 * p.ple * d3d.log10() - shadow;
        let delay = d3d / crate::geometry::SPEED_OF_LIGHT;
        let aod: Direction = (rx - tx).direction();
        let aoa: Direction = (tx - rx).direction();
        let origin = if los { MpcOrigin::Los } else { MpcOrigin::Reflection };
        let phase = electrical_phase(f, delay);
        let mut mpcs = vec![Mpc { origin, gain_db, phase, delay, aod, aoa }];
        if ctx.synthesis.stochastic {
            let lsp = draw_lsp(p, derive_seed(seed, 1));
            let clusters = generate_clusters(&lsp, (aod, aoa), &ctx.synthesis.generator, derive_seed(seed, 2));
            let power = 10f64.powf(gain_db / 10.0) / 10f64.powf(lsp.kf_db / 10.0);
            for c in &clusters {
                for r in &c.rays {
                    mpcs.push(Mpc {
                        origin: MpcOrigin::Stochastic,
                        gain_db: 10.0 * (power * c.power_fraction * r.power_fraction).log10(),
                        phase: r.phase,
                        delay: delay + c.ray_delay(r),
                        aod: c.ray_aod(r),
                        aoa: c.ray_aoa(r),
                    });
                }
            }
        }
        Ok(ChannelRealization { mpcs, state, tx, rx, frequency: f, seed })
    }
}

pub const DEFAULT_MODEL: &str = "dtecm";

pub fn registry() -> Vec<Box<dyn ChannelModel>> {
    vec![Box::new(Dtecm), Box::new(RayTracing), Box::new(FreeSpace), Box::new(Statistical)]
}

pub fn model_names() -> Vec<&'static str> {
    registry().iter().map(|m| m.name()).collect()
}

pub fn lookup(name: &str) -> Result<Box<dyn ChannelModel>> {
    registry()
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::UnknownModel(format!("`{name}` (available: {})", model_names().join(", "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name() {
        for name in model_names() {
            assert_eq!(lookup(name).unwrap().name(), name);
        }
        assert!(matches!(lookup("nope"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn los_probability_limits() {
        assert_eq!(uma_los_probability(10.0), 1.0);
        assert!(uma_los_probability(400.0) < 0.1);
        assert!(uma_los_probability(50.0) > uma_los_probability(100.0));
    }

    #[test]
    fn variants_agree_in_free_space() {
        let scene = Scene::free_space(Vec3::new(0.0, 0.0, 16.6), 220e9);
        let twin = FoliageTwin::clear(1.0).unwrap();
        let params = StateParamSet::campaign();
        let ctx =
            ModelContext { scene: &scene, twin: &twin, params: &params, synthesis: SynthesisConfig::deterministic() };
        let rx = Vec3::new(30.0, -40.0, 1.6);
        let a = Dtecm.realize(&ctx, rx, 1).unwrap();
        let b = RayTracing.realize(&ctx, rx, 1).unwrap();
        let c = FreeSpace.realize(&ctx, rx, 1).unwrap();
        assert_eq!(a.mpcs, b.mpcs);
        assert_eq!(a.mpcs, c.mpcs);
    }
}
