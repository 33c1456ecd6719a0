//! Segmented-linear foliage loss as a function of the foliage coverage
//! ratio (FCR) inside the transmit beam footprint.
//!
//! The returned value is a path-gain adjustment in dB: zero below the
//! segment point `r_th`, `slope * (fcr - r_th)` above it, plus an optional
//! Gaussian term. Negative values attenuate.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliageLossModel {
    pub slope_db: f64,
    pub r_th: f64,
    pub mu_chi_db: f64,
    pub sigma_chi_db: f64,
    pub phi_th_deg: f64,
}

impl Default for FoliageLossModel {
    fn default() -> Self {
        Self { slope_db: -30.0, r_th: 0.337, mu_chi_db: -0.15, sigma_chi_db: 4.31, phi_th_deg: 3.9 }
    }
}

impl FoliageLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r_th) {
            return Err(Error::invalid(format!("r_th must lie in [0, 1], got {}", self.r_th)));
        }
        if !(self.sigma_chi_db >= 0.0) {
            return Err(Error::invalid("sigma_chi must be non-negative"));
        }
        if !(self.phi_th_deg > 0.0) {
            return Err(Error::invalid("phi_th must be positive"));
        }
        Ok(())
    }

    /// Deterministic part of the adjustment.
    pub fn deterministic(&self, fcr: f64) -> f64 {
        if fcr < self.r_th {
            0.0
        } else {
            self.slope_db * (fcr - self.r_th)
        }
    }

    pub fn draw_chi<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mu_chi_db, self.sigma_chi_db).expect("validated sigma").sample(rng)
    }
}

/// Path-gain adjustment for a given FCR. `chi` is a realized draw of the
/// Gaussian term, or `None` for the deterministic model.
pub fn foliage_loss(fcr: f64, model: &FoliageLossModel, chi: Option<f64>) -> Result<f64> {
    if !(0.0..=1.0).contains(&fcr) {
        return Err(Error::invalid(format!("fcr must lie in [0, 1], got {fcr}")));
    }
    Ok(model.deterministic(fcr) + chi.unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliageFit {
    pub slope_db: f64,
    pub r_th: f64,
    pub mu_chi_db: f64,
    pub sigma_chi_db: f64,
}

impl FoliageFit {
    pub fn into_model(self, phi_th_deg: f64) -> FoliageLossModel {
        FoliageLossModel {
            slope_db: self.slope_db,
            r_th: self.r_th,
            mu_chi_db: self.mu_chi_db,
            sigma_chi_db: self.sigma_chi_db,
            phi_th_deg,
        }
    }
}

const COARSE_STEP: f64 = 1e-3;
const FINE_STEP: f64 = 1e-5;
const MIN_SAMPLES: usize = 10;

/// Least-squares slope and intercept for a fixed segment point; `None` if
/// fewer than two samples sit above it or none below.
fn fit_at(samples: &[(f64, f64)], r_th: f64) -> Option<FoliageFit> {
    let below = samples.iter().filter(|s| s.0 < r_th).count();
    let above = samples.iter().filter(|s| s.0 > r_th).count();
    if below == 0 || above < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(f, y) in samples {
        let x = (f - r_th).max(0.0);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-15 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = samples
        .iter()
        .map(|&(f, y)| {
            let r = y - slope * (f - r_th).max(0.0) - intercept;
            r * r
        })
        .sum();
    Some(FoliageFit { slope_db: slope, r_th, mu_chi_db: intercept, sigma_chi_db: (ss / n).sqrt() })
}

fn best_over(samples: &[(f64, f64)], candidates: impl Iterator<Item = f64>) -> Option<FoliageFit> {
    let mut best: Option<FoliageFit> = None;
    for r in candidates {
        if let Some(fit) = fit_at(samples, r) {
            if best.is_none_or(|b| fit.sigma_chi_db < b.sigma_chi_db) {
                best = Some(fit);
            }
        }
    }
    best
}

/// Fits slope, segment point and the Gaussian residual to `(fcr, excess
/// gain dB)` samples. The segment point minimizes the residual standard
/// deviation over a 0.001 grid on [0, 1], then a 1e-5 grid around it.
pub fn fit_foliage_loss(samples: &[(f64, f64)]) -> Result<FoliageFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples(format!("need at least {MIN_SAMPLES} samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|s| !(0.0..=1.0).contains(&s.0) || !s.1.is_finite()) {
        return Err(Error::invalid(format!("invalid sample {bad:?}")));
    }
    let coarse = (0..=1000).map(|i| i as f64 * COARSE_STEP);
    let Some(rough) = best_over(samples, coarse) else {
        return Err(Error::InsufficientSamples("samples do not straddle any segment point".into()));
    };
    let lo = (rough.r_th - COARSE_STEP).max(0.0);
    let steps = (2.0 * COARSE_STEP / FINE_STEP) as usize;
    let fine = (0..=steps).map(move |i| lo + i as f64 * FINE_STEP).filter(|r| *r <= 1.0);
    let refined = best_over(samples, fine).unwrap_or(rough);
    Ok(if refined.sigma_chi_db < rough.sigma_chi_db { refined } else { rough })
}

/// Chooses the beam-footprint window whose sample set gives the smallest
/// residual standard deviation. Returns the window and its fit.
pub fn select_window(sets: &[(f64, Vec<(f64, f64)>)]) -> Result<(f64, FoliageFit)> {
    let mut best: Option<(f64, FoliageFit)> = None;
    for (phi_th, samples) in sets {
        let fit = fit_foliage_loss(samples)?;
        if best.is_none_or(|b| fit.sigma_chi_db < b.1.sigma_chi_db) {
            best = Some((*phi_th, fit));
        }
    }
    best.ok_or(Error::EmptyInput("window candidates"))
}
