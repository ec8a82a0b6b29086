//! Physical network parameters.

use crate::error::{Error, Result};

/// How a UAV scales the signal it forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelayMode {
    /// Unit gain: the relayed term is the plain product of both hop gains.
    Literal,
    /// Variable-gain amplify-and-forward; the UAV retransmits at its power budget.
    #[default]
    NormalizedAf,
}

impl RelayMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelayMode::Literal => "literal",
            RelayMode::NormalizedAf => "normalized_af",
        }
    }
}

impl std::str::FromStr for RelayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(RelayMode::Literal),
            "normalized_af" => Ok(RelayMode::NormalizedAf),
            other => Err(Error::Config(format!("unknown relay_mode `{other}`"))),
        }
    }
}

/// Small-scale fading law applied to every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fading {
    #[default]
    Rayleigh,
    /// Every fading coefficient pinned to 1 (deterministic channels).
    Unit,
}

impl Fading {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fading::Rayleigh => "rayleigh",
            Fading::Unit => "unit",
        }
    }
}

impl std::str::FromStr for Fading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh" => Ok(Fading::Rayleigh),
            "unit" => Ok(Fading::Unit),
            other => Err(Error::Config(format!("unknown fading `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_cells: usize,
    pub users_per_cell: usize,
    pub cell_radius_m: f64,
    pub min_user_distance_m: f64,
    /// CEU threshold D0. `f64::INFINITY` disables UAV assistance entirely.
    pub ref_distance_m: f64,
    pub uav_altitude_m: f64,
    pub inter_site_distance_m: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub n_power_levels: usize,
    pub noise_dbm: f64,
    pub relay_mode: RelayMode,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope: f64,
    /// Slope used on hops that touch a UAV.
    pub air_pathloss_slope: f64,
    pub fading: Fading,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_cells: 9,
            users_per_cell: 2,
            cell_radius_m: 1000.0,
            min_user_distance_m: 10.0,
            ref_distance_m: 400.0,
            uav_altitude_m: 100.0,
            inter_site_distance_m: 2000.0,
            p_min_dbm: 5.0,
            p_max_dbm: 38.0,
            n_power_levels: 10,
            noise_dbm: -114.0,
            relay_mode: RelayMode::NormalizedAf,
            pathloss_intercept_db: 128.1,
            pathloss_slope: 37.6,
            air_pathloss_slope: 37.6,
            fading: Fading::Rayleigh,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn n_users(&self) -> usize {
        self.n_cells * self.users_per_cell
    }

    /// Length of the encoded state vector (distances, gains, indicators).
    pub fn state_dim(&self) -> usize {
        3 * self.n_users()
    }

    /// Width of the factorized Q-network output: one head of levels per BS.
    pub fn action_dim(&self) -> usize {
        self.n_cells * self.n_power_levels
    }

    /// Checks every invariant except the grid shape, which only matters
    /// when the layout is built by [`crate::topology::build_grid`].
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_cells == 0 {
            return fail("n_cells must be at least 1".into());
        }
        if self.users_per_cell == 0 {
            return fail("users_per_cell must be at least 1".into());
        }
        if !(self.min_user_distance_m > 0.0 && self.min_user_distance_m < self.cell_radius_m) {
            return fail(format!(
                "need 0 < min_user_distance_m ({}) < cell_radius_m ({})",
                self.min_user_distance_m, self.cell_radius_m
            ));
        }
        if !(self.ref_distance_m >= 0.0) {
            return fail(format!("ref_distance_m must be >= 0, got {}", self.ref_distance_m));
        }
        if !(self.uav_altitude_m > 0.0 && self.uav_altitude_m.is_finite()) {
            return fail(format!("uav_altitude_m must be > 0, got {}", self.uav_altitude_m));
        }
        if !(self.inter_site_distance_m > 0.0) {
            return fail("inter_site_distance_m must be > 0".into());
        }
        if !(self.p_min_dbm < self.p_max_dbm) {
            return fail(format!(
                "need p_min_dbm ({}) < p_max_dbm ({})",
                self.p_min_dbm, self.p_max_dbm
            ));
        }
        if self.n_power_levels < 2 {
            return fail("n_power_levels must be at least 2".into());
        }
        for (name, v) in [
            ("noise_dbm", self.noise_dbm),
            ("pathloss_intercept_db", self.pathloss_intercept_db),
            ("pathloss_slope", self.pathloss_slope),
            ("air_pathloss_slope", self.air_pathloss_slope),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}
