//! Experiment description and the flat `key = value` config format.
//!
//! ```text
//! # network
//! users_per_cell = 2
//! ref_distance_m = 400
//! # agent
//! hidden_layers = 128, 64
//! # experiment
//! d0_grid = 100, 400, 1000
//! seeds = 0, 1, 2
//! ```
//!
//! Keys are the field names of [`NetworkConfig`], [`AgentConfig`] and
//! [`ExperimentSpec`]. Lists are comma separated. Unknown or repeated keys
//! are rejected.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relaynet_core::{AgentConfig, NetworkConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scenario {
    #[default]
    TrainingCurve,
    TestingCurve,
    SweepD0,
    SweepUsers,
    BaselineCompare,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::TrainingCurve => "training_curve",
            Scenario::TestingCurve => "testing_curve",
            Scenario::SweepD0 => "sweep_d0",
            Scenario::SweepUsers => "sweep_users",
            Scenario::BaselineCompare => "baseline_compare",
        }
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "training_curve" => Scenario::TrainingCurve,
            "testing_curve" => Scenario::TestingCurve,
            "sweep_d0" => Scenario::SweepD0,
            "sweep_users" => Scenario::SweepUsers,
            "baseline_compare" => Scenario::BaselineCompare,
            other => return Err(HarnessError::Config(format!("unknown scenario `{other}`"))),
        })
    }
}

pub const DESK_D0_GRID_M: [f64; 5] = [100.0, 250.0, 400.0, 700.0, 1000.0];
pub const ALTITUDE_GRID_M: [f64; 3] = [25.0, 50.0, 100.0];
pub const DESK_USERS_GRID: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub d0_grid: Vec<f64>,
    pub altitude_grid: Vec<f64>,
    pub users_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Greedy evaluation episodes after training.
    pub eval_episodes: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            d0_grid: DESK_D0_GRID_M.to_vec(),
            altitude_grid: ALTITUDE_GRID_M.to_vec(),
            users_grid: DESK_USERS_GRID.to_vec(),
            seeds: vec![0, 1, 2],
            out_dir: PathBuf::from("results"),
            eval_episodes: 20,
        }
    }
}

impl ExperimentSpec {
    /// Switches the sweeps to the dense grids: D0 every 100 m and K = 1..=8.
    pub fn use_full_grid(&mut self) {
        self.d0_grid = (1..=10).map(|i| 100.0 * i as f64).collect();
        self.users_grid = (1..=8).collect();
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty");
        }
        if self.eval_episodes == 0 {
            return fail("eval_episodes must be positive");
        }
        match self.scenario {
            Scenario::SweepD0 if self.d0_grid.is_empty() || self.altitude_grid.is_empty() => {
                fail("sweep_d0 needs non-empty d0_grid and altitude_grid")
            }
            Scenario::SweepUsers if self.users_grid.is_empty() => fail("sweep_users needs a non-empty users_grid"),
            _ if self
                .d0_grid
                .iter()
                .chain(&self.altitude_grid)
                .any(|v| v.is_nan() || *v < 0.0) =>
            {
                fail("grid values must be non-negative")
            }
            _ if self.users_grid.contains(&0) => fail("users_grid entries must be positive"),
            _ => Ok(()),
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub network: NetworkConfig,
    pub agent: AgentConfig,
    pub experiment: ExperimentSpec,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.agent.validate()?;
        self.experiment.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            s.set(key, value).map_err(|e| {
                let msg = match e {
                    HarnessError::Config(m) => m,
                    other => other.to_string(),
                };
                HarnessError::Config(format!("line {}: {msg}", n + 1))
            })?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let net = &mut self.network;
        let agent = &mut self.agent;
        let exp = &mut self.experiment;
        match key {
            "n_cells" => net.n_cells = parse(key, value)?,
            "users_per_cell" => net.users_per_cell = parse(key, value)?,
            "cell_radius_m" => net.cell_radius_m = parse(key, value)?,
            "min_user_distance_m" => net.min_user_distance_m = parse(key, value)?,
            "ref_distance_m" => net.ref_distance_m = parse(key, value)?,
            "uav_altitude_m" => net.uav_altitude_m = parse(key, value)?,
            "inter_site_distance_m" => net.inter_site_distance_m = parse(key, value)?,
            "p_min_dbm" => net.p_min_dbm = parse(key, value)?,
            "p_max_dbm" => net.p_max_dbm = parse(key, value)?,
            "n_power_levels" => net.n_power_levels = parse(key, value)?,
            "noise_dbm" => net.noise_dbm = parse(key, value)?,
            "relay_mode" => net.relay_mode = value.parse()?,
            "pathloss_intercept_db" => net.pathloss_intercept_db = parse(key, value)?,
            "pathloss_slope" => net.pathloss_slope = parse(key, value)?,
            "air_pathloss_slope" => net.air_pathloss_slope = parse(key, value)?,
            "fading" => net.fading = value.parse()?,
            "seed" => net.seed = parse(key, value)?,
            "gamma" => agent.gamma = parse(key, value)?,
            "learning_rate" => agent.learning_rate = parse(key, value)?,
            "epsilon_init" => agent.epsilon_init = parse(key, value)?,
            "epsilon_floor" => agent.epsilon_floor = parse(key, value)?,
            "epsilon_decay" => agent.epsilon_decay = parse(key, value)?,
            "batch_size" => agent.batch_size = parse(key, value)?,
            "train_every" => agent.train_every = parse(key, value)?,
            "target_sync_every" => agent.target_sync_every = parse(key, value)?,
            "slots_per_episode" => agent.slots_per_episode = parse(key, value)?,
            "episodes" => agent.episodes = parse(key, value)?,
            "replay_capacity" => agent.replay_capacity = parse(key, value)?,
            "hidden_layers" => agent.hidden_layers = parse_list(key, value)?,
            "scenario" => exp.scenario = value.parse()?,
            "d0_grid" => exp.d0_grid = parse_list(key, value)?,
            "altitude_grid" => exp.altitude_grid = parse_list(key, value)?,
            "users_grid" => exp.users_grid = parse_list(key, value)?,
            "seeds" => exp.seeds = parse_list(key, value)?,
            "out_dir" => exp.out_dir = PathBuf::from(value),
            "eval_episodes" => exp.eval_episodes = parse(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use relaynet_core::RelayMode;

    #[test]
    fn parses_each_section() {
        let s = Settings::parse(
            "# comment\nusers_per_cell = 3\nref_distance_m = inf  # no UAVs\nrelay_mode = literal\n\
             hidden_layers = 32, 16\nseeds = 4,5\nscenario = sweep_users\n",
        )
        .unwrap();
        assert_eq!(s.network.users_per_cell, 3);
        assert!(s.network.ref_distance_m.is_infinite());
        assert_eq!(s.network.relay_mode, RelayMode::Literal);
        assert_eq!(s.agent.hidden_layers, vec![32, 16]);
        assert_eq!(s.experiment.seeds, vec![4, 5]);
        assert_eq!(s.experiment.scenario, Scenario::SweepUsers);
        assert_eq!(s.agent.gamma, 0.99);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        for bad in [
            "gama = 0.9",
            "seed = 1\nseed = 2",
            "episodes",
            "episodes = many",
            "scenario = fig9",
        ] {
            let err = Settings::parse(bad).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}: {err}");
        }
    }

    #[test]
    fn validation_catches_empty_seeds() {
        let mut s = Settings::default();
        s.experiment.seeds.clear();
        assert!(s.validate().is_err());
        let mut s = Settings::default();
        s.experiment.scenario = Scenario::SweepUsers;
        s.experiment.users_grid.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn full_grid_is_dense() {
        let mut e = ExperimentSpec::default();
        e.use_full_grid();
        assert_eq!(e.d0_grid.len(), 10);
        assert_eq!(e.users_grid, (1..=8).collect::<Vec<_>>());
    }
}
