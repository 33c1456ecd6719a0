//! Noise-limited single-cell link evaluation: SNR per drop, average
//! spectral efficiency and coverage ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::{ChannelModel, ModelContext};
use crate::seed::derive_seed;

pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Receivers whose modeled loss exceeds this are counted as outage.
pub const OUTAGE_PATH_LOSS_DB: f64 = 160.0;
pub const DEFAULT_RX_HEIGHT: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub pt_dbm: f64,
    /// Combined transmit and receive antenna gain, dB.
    pub total_gain_db: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
    pub snr_threshold_db: f64,
    pub cell_radius_m: f64,
    /// Sector start azimuth and extent, degrees.
    pub sector: (f64, f64),
    pub n_drops: usize,
    pub rx_height_m: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            pt_dbm: 13.0,
            total_gain_db: 70.0,
            noise_figure_db: 10.0,
            temperature_k: 300.0,
            bandwidth_hz: 2e9,
            snr_threshold_db: 0.0,
            cell_radius_m: 100.0,
            sector: (180.0, 180.0),
            n_drops: 10_000,
            rx_height_m: DEFAULT_RX_HEIGHT,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !(self.temperature_k > 0.0) {
            return Err(Error::invalid("bandwidth and temperature must be positive"));
        }
        if self.n_drops == 0 {
            return Err(Error::invalid("n_drops must be at least 1"));
        }
        if !(self.cell_radius_m > 0.0) {
            return Err(Error::invalid("cell radius must be positive"));
        }
        if !(self.sector.1 > 0.0 && self.sector.1 <= 360.0) {
            return Err(Error::invalid("sector extent must lie in (0, 360]"));
        }
        Ok(())
    }
}

/// Thermal noise `kTB` plus the noise figure, dBm.
pub fn noise_power_dbm(cfg: &LinkConfig) -> f64 {
    10.0 * (BOLTZMANN * cfg.temperature_k * cfg.bandwidth_hz / 1e-3).log10() + cfg.noise_figure_db
}

/// Received SNR in dB for a positive path loss.
pub fn snr(path_loss_db: f64, cfg: &LinkConfig) -> f64 {
    cfg.pt_dbm + cfg.total_gain_db - path_loss_db - noise_power_dbm(cfg)
}

/// Drops uniform over the area of the circular sector around `tx`.
pub fn sample_rx_positions(tx: Vec3, cfg: &LinkConfig, rx_height: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, extent) = cfg.sector;
    (0..cfg.n_drops)
        .map(|_| {
            let r = cfg.cell_radius_m * rng.random::<f64>().sqrt();
            let az = (start + extent * rng.random::<f64>()).to_radians();
            Vec3::new(tx.x + r * az.cos(), tx.y + r * az.sin(), rx_height)
        })
        .collect()
}

/// Modeled path loss per drop, `None` for outage drops.
pub fn drop_path_losses(
    model: &dyn ChannelModel,
    ctx: &ModelContext<'_>,
    cfg: &LinkConfig,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    let positions = sample_rx_positions(ctx.scene.tx, cfg, cfg.rx_height_m, derive_seed(seed, 0));
    let channel_seed = derive_seed(seed, 1);
    positions
        .par_iter()
        .enumerate()
        .map(|(i, &rx)| {
            let real = model.realize(ctx, rx, derive_seed(channel_seed, i as u64))?;
            let pl = real.path_loss_db();
            Ok((!real.mpcs.is_empty() && pl <= OUTAGE_PATH_LOSS_DB).then_some(pl))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub mean_se_bps_hz: f64,
    pub coverage_ratio: f64,
    pub n_drops: usize,
    pub n_outage: usize,
}

/// Average spectral efficiency and coverage over per-drop path losses.
pub fn summarize(path_losses: &[Option<f64>], cfg: &LinkConfig) -> Result<LinkSummary> {
    if path_losses.is_empty() {
        return Err(Error::invalid("n_drops must be at least 1"));
    }
    let mut se = 0.0;
    let mut covered = 0usize;
    let mut outage = 0usize;
    for pl in path_losses {
        match pl {
            Some(pl) => {
                let gamma = snr(*pl, cfg);
                se += (1.0 + 10f64.powf(gamma / 10.0)).log2();
                covered += (gamma > cfg.snr_threshold_db) as usize;
            }
            None => outage += 1,
        }
    }
    let n = path_losses.len();
    Ok(LinkSummary {
        mean_se_bps_hz: se / n as f64,
        coverage_ratio: covered as f64 / n as f64,
        n_drops: n,
        n_outage: outage,
    })
}

pub fn evaluate(model: &dyn ChannelModel, ctx: &ModelContext<'_>, cfg: &LinkConfig, seed: u64) -> Result<LinkSummary> {
    summarize(&drop_path_losses(model, ctx, cfg, seed)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_hand_case() {
        let cfg = LinkConfig::default();
        assert!((snr(130.0, &cfg) - 23.82).abs() < 0.05);
        let more = LinkConfig { total_gain_db: 80.0, ..cfg };
        assert!((snr(130.0, &more) - snr(130.0, &cfg) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identical_drops() {
        let cfg = LinkConfig::default();
        let s = summarize(&[Some(120.0); 5], &cfg).unwrap();
        let gamma = 10f64.powf(snr(120.0, &cfg) / 10.0);
        assert_eq!(s.mean_se_bps_hz, (1.0 + gamma).log2());
        assert_eq!(s.coverage_ratio, 1.0);
        let s = summarize(&[None, Some(120.0)], &cfg).unwrap();
        assert_eq!(s.mean_se_bps_hz, (1.0 + gamma).log2() / 2.0);
        assert_eq!(s.n_outage, 1);
        assert!(summarize(&[], &cfg).is_err());
    }

    #[test]
    fn drops_inside_sector() {
        let cfg = LinkConfig { cell_radius_m: 200.0, n_drops: 10_000, ..LinkConfig::default() };
        let tx = Vec3::new(5.0, -3.0, 16.6);
        for p in sample_rx_positions(tx, &cfg, 1.6, 4) {
            assert!((p.x - tx.x).hypot(p.y - tx.y) <= 200.0 + 1e-9);
            assert!(p.y <= tx.y + 1e-9);
            assert_eq!(p.z, 1.6);
        }
    }
}
