//! Link budget: desired signal, terrestrial and aerial interference, SINR
//! and spectral efficiency for every user in one time slot.

use rand::Rng;

use crate::channel::{dbm_to_mw, PathLoss};
use crate::config::{NetworkConfig, RelayMode};
use crate::error::{Error, Result};
use crate::topology::NetworkSnapshot;

/// Per-BS discrete power level indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PowerAction(pub Vec<usize>);

impl PowerAction {
    pub fn uniform(n_cells: usize, level: usize) -> Self {
        PowerAction(vec![level; n_cells])
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, n_cells: usize, n_levels: usize) -> Result<()> {
        if self.0.len() != n_cells {
            return Err(Error::InvalidAction(format!(
                "expected {n_cells} power levels, got {}",
                self.0.len()
            )));
        }
        if let Some((bs, &m)) = self.0.iter().enumerate().find(|(_, &m)| m >= n_levels) {
            return Err(Error::InvalidAction(format!(
                "BS {bs}: level {m} out of range 0..{n_levels}"
            )));
        }
        Ok(())
    }

    /// Linear transmit power of every BS, mW.
    pub fn to_mw(&self, config: &NetworkConfig) -> Result<Vec<f64>> {
        self.0
            .iter()
            .map(|&m| power_of_level(m, config).map(dbm_to_mw))
            .collect()
    }
}

/// Transmit power (dBm) of level `index` on the equally spaced grid.
pub fn power_of_level(index: usize, config: &NetworkConfig) -> Result<f64> {
    let m = config.n_power_levels;
    if index >= m {
        return Err(Error::InvalidAction(format!("power level {index} out of range 0..{m}")));
    }
    let step = (config.p_max_dbm - config.p_min_dbm) / (m - 1) as f64;
    Ok(config.p_min_dbm + index as f64 * step)
}

/// Amplification applied by a UAV before forwarding.
///
/// `NormalizedAf` scales the received backhaul (plus noise) to the UAV's
/// transmit budget.
pub fn relay_amplification(backhaul_received_mw: f64, uav_tx_mw: f64, noise_mw: f64, mode: RelayMode) -> f64 {
    match mode {
        RelayMode::Literal => 1.0,
        RelayMode::NormalizedAf => uav_tx_mw / (backhaul_received_mw + noise_mw),
    }
}

/// log2(1 + SINR), bps/Hz.
pub fn spectral_efficiency(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("SINR must be non-negative, got {sinr}")));
    }
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Distance-only path-loss gains for a snapshot. Fixed for an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    n_cells: usize,
    /// `[user * n_cells + bs]`
    pub direct: Vec<f64>,
    /// BS m to UAV m (vertical hop).
    pub backhaul: Vec<f64>,
    /// `[user * n_cells + uav]`
    pub access: Vec<f64>,
}

impl LargeScale {
    pub fn compute(snapshot: &NetworkSnapshot, config: &NetworkConfig) -> Result<Self> {
        let ground = PathLoss::terrestrial(config);
        let air = PathLoss::air(config);
        let n = snapshot.n_cells();
        let mut direct = Vec::with_capacity(snapshot.n_users() * n);
        let mut access = Vec::with_capacity(snapshot.n_users() * n);
        for user in &snapshot.user_positions {
            for bs in &snapshot.bs_positions {
                direct.push(ground.gain(user.distance(bs))?);
            }
            for uav in &snapshot.uav_positions {
                access.push(air.gain(uav.distance_to_ground(user))?);
            }
        }
        let backhaul = snapshot
            .uav_positions
            .iter()
            .zip(&snapshot.bs_positions)
            .map(|(uav, bs)| air.gain(uav.distance_to_ground(bs)))
            .collect::<Result<_>>()?;
        Ok(Self {
            n_cells: n,
            direct,
            backhaul,
            access,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
}

/// Instantaneous gains (fading times path loss) of every link in one slot.
///
/// Every UAV link is drawn whether or not the UAV is active, so the random
/// stream does not depend on the CEU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    n_cells: usize,
    pub direct: Vec<f64>,
    pub backhaul: Vec<f64>,
    pub access: Vec<f64>,
}

impl LinkRealization {
    pub fn draw<R: Rng + ?Sized>(large: &LargeScale, config: &NetworkConfig, rng: &mut R) -> Self {
        let mut faded = |gains: &[f64]| -> Vec<f64> { gains.iter().map(|g| g * config.fading.draw(rng)).collect() };
        let direct = faded(&large.direct);
        let backhaul = faded(&large.backhaul);
        let access = faded(&large.access);
        Self {
            n_cells: large.n_cells,
            direct,
            backhaul,
            access,
        }
    }

    /// Builds a realization from explicit gains (tests, fixed channels).
    pub fn from_gains(n_cells: usize, direct: Vec<f64>, backhaul: Vec<f64>, access: Vec<f64>) -> Self {
        Self {
            n_cells,
            direct,
            backhaul,
            access,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn direct(&self, user: usize, bs: usize) -> f64 {
        self.direct[user * self.n_cells + bs]
    }

    pub fn access(&self, user: usize, uav: usize) -> f64 {
        self.access[user * self.n_cells + uav]
    }

    fn check(&self, snapshot: &NetworkSnapshot) -> Result<()> {
        let n = snapshot.n_cells();
        let u = snapshot.n_users();
        for (expected, actual) in [
            (u * n, self.direct.len()),
            (n, self.backhaul.len()),
            (u * n, self.access.len()),
        ] {
            if expected != actual {
                return Err(Error::Shape { expected, actual });
            }
        }
        Ok(())
    }
}

/// Interference split by origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interference {
    pub terrestrial_mw: f64,
    pub aerial_mw: f64,
}

impl Interference {
    pub fn total_mw(&self) -> f64 {
        self.terrestrial_mw + self.aerial_mw
    }
}

/// One slot's downlink: snapshot, channel and transmit powers bound together.
///
/// Each UAV transmits at its own BS's current power.
#[derive(Debug)]
pub struct Downlink<'a> {
    snapshot: &'a NetworkSnapshot,
    links: &'a LinkRealization,
    tx_mw: Vec<f64>,
    /// `G_AF * P * g1 L1` per UAV; zero for inactive UAVs.
    relay_out_mw: Vec<f64>,
    noise_mw: f64,
}

impl<'a> Downlink<'a> {
    pub fn new(
        snapshot: &'a NetworkSnapshot,
        links: &'a LinkRealization,
        action: &PowerAction,
        config: &NetworkConfig,
    ) -> Result<Self> {
        action.validate(snapshot.n_cells(), config.n_power_levels)?;
        let tx_mw = action.to_mw(config)?;
        Self::with_powers(snapshot, links, tx_mw, config)
    }

    /// Like [`new`](Self::new) but with arbitrary linear BS powers.
    pub fn with_powers(
        snapshot: &'a NetworkSnapshot,
        links: &'a LinkRealization,
        tx_mw: Vec<f64>,
        config: &NetworkConfig,
    ) -> Result<Self> {
        links.check(snapshot)?;
        if tx_mw.len() != snapshot.n_cells() {
            return Err(Error::Shape {
                expected: snapshot.n_cells(),
                actual: tx_mw.len(),
            });
        }
        let noise_mw = dbm_to_mw(config.noise_dbm);
        let relay_out_mw = (0..snapshot.n_cells())
            .map(|m| {
                if !snapshot.is_uav_active(m) {
                    return 0.0;
                }
                let backhaul_rx = tx_mw[m] * links.backhaul[m];
                relay_amplification(backhaul_rx, tx_mw[m], noise_mw, config.relay_mode) * backhaul_rx
            })
            .collect();
        Ok(Self {
            snapshot,
            links,
            tx_mw,
            relay_out_mw,
            noise_mw,
        })
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    pub fn signal_mw(&self, user: usize) -> f64 {
        let bs = self.snapshot.serving_cell(user);
        let direct = self.tx_mw[bs] * self.links.direct(user, bs);
        match self.snapshot.paired_uav(user) {
            Some(m) => direct + self.relay_out_mw[m] * self.links.access(user, m),
            None => direct,
        }
    }

    pub fn interference(&self, user: usize) -> Interference {
        let serving = self.snapshot.serving_cell(user);
        let own_uav = self.snapshot.paired_uav(user);
        let terrestrial_mw = (0..self.snapshot.n_cells())
            .filter(|&n| n != serving)
            .map(|n| self.tx_mw[n] * self.links.direct(user, n))
            .sum();
        let aerial_mw = self
            .snapshot
            .active_uavs
            .iter()
            .filter(|&&m| Some(m) != own_uav)
            .map(|&m| self.relay_out_mw[m] * self.links.access(user, m))
            .sum();
        Interference {
            terrestrial_mw,
            aerial_mw,
        }
    }

    pub fn interference_mw(&self, user: usize) -> f64 {
        self.interference(user).total_mw()
    }

    pub fn sinr(&self, user: usize) -> f64 {
        self.signal_mw(user) / (self.interference_mw(user) + self.noise_mw)
    }

    /// Spectral efficiency of every user, bps/Hz.
    pub fn rates(&self) -> Vec<f64> {
        (0..self.snapshot.n_users())
            .map(|u| spectral_efficiency(self.sinr(u)).expect("SINR of non-negative powers"))
            .collect()
    }
}
