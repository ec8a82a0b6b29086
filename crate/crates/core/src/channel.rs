//! Large-scale path loss, Rayleigh small-scale fading and dB/linear helpers.
//!
//! All link arithmetic downstream is done in linear milliwatts; dB and dBm
//! only appear at configuration boundaries.

use rand::distr::Open01;
use rand::Rng;

use crate::config::{Fading, NetworkConfig};
use crate::error::{Error, Result};

/// Log-distance model `intercept + slope * log10(d / 1 km)`, loss in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl PathLoss {
    pub fn terrestrial(config: &NetworkConfig) -> Self {
        Self {
            intercept_db: config.pathloss_intercept_db,
            slope_db: config.pathloss_slope,
        }
    }

    /// Model for hops that start or end at a UAV.
    pub fn air(config: &NetworkConfig) -> Self {
        Self {
            intercept_db: config.pathloss_intercept_db,
            slope_db: config.air_pathloss_slope,
        }
    }

    pub fn db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) || !distance_m.is_finite() {
            return Err(Error::Domain(format!(
                "path loss needs a positive finite distance, got {distance_m}"
            )));
        }
        Ok(self.intercept_db + self.slope_db * (distance_m / 1000.0).log10())
    }

    /// Linear power gain `10^(-L/10)`.
    pub fn gain(&self, distance_m: f64) -> Result<f64> {
        Ok(db_to_linear(-self.db(distance_m)?))
    }
}

/// Terrestrial path loss in dB at `distance_m`.
pub fn pathloss_db(distance_m: f64, config: &NetworkConfig) -> Result<f64> {
    PathLoss::terrestrial(config).db(distance_m)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_mw(p_dbm: f64) -> f64 {
    db_to_linear(p_dbm)
}

pub fn mw_to_dbm(p_mw: f64) -> f64 {
    linear_to_db(p_mw)
}

/// Maps a uniform draw on (0, 1] to a unit-mean exponential power gain.
pub fn rayleigh_from_uniform(u: f64) -> f64 {
    -u.ln()
}

/// Power of a unit-variance Rayleigh amplitude: exponential with mean 1.
pub fn rayleigh_power_gain<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    rayleigh_from_uniform(u)
}

impl Fading {
    /// Draws one small-scale power coefficient. `Unit` consumes no randomness.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Fading::Rayleigh => rayleigh_power_gain(rng),
            Fading::Unit => 1.0,
        }
    }
}

/// Linear power gain of one link: fading times path-loss gain.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LinkGain(pub f64);

impl LinkGain {
    pub fn from_parts(fading: f64, pathloss_gain: f64) -> Self {
        debug_assert!(fading >= 0.0 && pathloss_gain >= 0.0);
        LinkGain(fading * pathloss_gain)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Terrestrial link gain with fading drawn per `config.fading`.
pub fn link_gain<R: Rng + ?Sized>(distance_m: f64, rng: &mut R, config: &NetworkConfig) -> Result<LinkGain> {
    let pl = PathLoss::terrestrial(config).gain(distance_m)?;
    Ok(LinkGain::from_parts(config.fading.draw(rng), pl))
}
