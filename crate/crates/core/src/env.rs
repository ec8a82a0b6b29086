//! Episodic power-control environment.
//!
//! Geometry is drawn on [`Env::reset`] and frozen for the episode; every
//! [`Env::step`] applies the action to the current channel, scores it, then
//! redraws all small-scale fading for the next slot (block fading).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::linear_to_db;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::radio::{Downlink, LargeScale, LinkRealization, PowerAction};
use crate::topology::{NetworkSnapshot, Point2};

/// Serving-gain window mapped affinely onto [0, 1].
pub const GAIN_FLOOR_DB: f64 = -150.0;
pub const GAIN_CEIL_DB: f64 = -60.0;

/// Observation: all normalized distances, then all normalized serving
/// gains, then the assisted-CEU indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState(pub Vec<f64>);

impl EnvState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn normalize_gain_db(gain_db: f64) -> f64 {
    let x = (gain_db - GAIN_FLOOR_DB) / (GAIN_CEIL_DB - GAIN_FLOOR_DB);
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

pub fn encode_state(snapshot: &NetworkSnapshot, links: &LinkRealization, config: &NetworkConfig) -> EnvState {
    let n = snapshot.n_users();
    let mut v = Vec::with_capacity(3 * n);
    v.extend(
        snapshot
            .serving_distance_m
            .iter()
            .map(|d| (d / config.cell_radius_m).clamp(0.0, 1.0)),
    );
    v.extend((0..n).map(|u| {
        let g = links.direct(u, snapshot.serving_cell(u));
        normalize_gain_db(linear_to_db(g))
    }));
    v.extend((0..n).map(|u| {
        if snapshot.is_ceu[u] && snapshot.paired_uav(u).is_some() {
            1.0
        } else {
            0.0
        }
    }));
    EnvState(v)
}

fn group_mean(rates: &[f64], flags: &[bool], want: bool) -> Option<f64> {
    let (sum, count) = rates
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f == want)
        .fold((0.0, 0usize), |(s, c), (r, _)| (s + r, c + 1));
    (count > 0).then(|| sum / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Sum spectral efficiency over all users, bps/Hz.
    pub reward: f64,
    pub user_rates: Vec<f64>,
    pub next_state: EnvState,
    /// `None` when the group is empty.
    pub ccu_mean: Option<f64>,
    pub ceu_mean: Option<f64>,
    /// True after the last slot of the episode.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn mean_rate(&self) -> f64 {
        self.reward / self.user_rates.len() as f64
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Grid,
    Sites(Vec<Point2>),
    Frozen(NetworkSnapshot),
}

#[derive(Debug, Clone)]
struct Episode {
    snapshot: NetworkSnapshot,
    large: LargeScale,
    links: LinkRealization,
    slot: usize,
}

#[derive(Debug, Clone)]
pub struct Env {
    config: NetworkConfig,
    slots_per_episode: usize,
    layout: Layout,
    rng: ChaCha8Rng,
    episode: Option<Episode>,
}

impl Env {
    /// Square-grid environment seeded from `config.seed`.
    pub fn new(config: NetworkConfig, slots_per_episode: usize) -> Result<Self> {
        crate::topology::build_grid(&config)?;
        Self::with_layout(config, slots_per_episode, Layout::Grid)
    }

    /// Users re-dropped every episode around explicit BS sites.
    pub fn on_sites(config: NetworkConfig, sites: Vec<Point2>, slots_per_episode: usize) -> Result<Self> {
        if sites.len() != config.n_cells {
            return Err(Error::Shape {
                expected: config.n_cells,
                actual: sites.len(),
            });
        }
        Self::with_layout(config, slots_per_episode, Layout::Sites(sites))
    }

    /// Every episode reuses `snapshot`; only fading is random.
    pub fn frozen(config: NetworkConfig, snapshot: NetworkSnapshot, slots_per_episode: usize) -> Result<Self> {
        if snapshot.n_cells() != config.n_cells || snapshot.users_per_cell != config.users_per_cell {
            return Err(Error::Config(
                "frozen snapshot does not match n_cells/users_per_cell".into(),
            ));
        }
        Self::with_layout(config, slots_per_episode, Layout::Frozen(snapshot))
    }

    fn with_layout(config: NetworkConfig, slots_per_episode: usize, layout: Layout) -> Result<Self> {
        config.validate()?;
        if slots_per_episode == 0 {
            return Err(Error::Config("slots_per_episode must be at least 1".into()));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            slots_per_episode,
            layout,
            rng,
            episode: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn slots_per_episode(&self) -> usize {
        self.slots_per_episode
    }

    pub fn state_dim(&self) -> usize {
        self.config.state_dim()
    }

    pub fn snapshot(&self) -> Option<&NetworkSnapshot> {
        self.episode.as_ref().map(|e| &e.snapshot)
    }

    pub fn links(&self) -> Option<&LinkRealization> {
        self.episode.as_ref().map(|e| &e.links)
    }

    /// Slots already played in the current episode.
    pub fn slot(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.slot)
    }

    pub fn reset(&mut self) -> Result<EnvState> {
        let snapshot = match &self.layout {
            Layout::Grid => NetworkSnapshot::generate(&self.config, &mut self.rng)?,
            Layout::Sites(sites) => NetworkSnapshot::generate_on_sites(sites.clone(), &self.config, &mut self.rng)?,
            Layout::Frozen(s) => s.clone(),
        };
        let large = LargeScale::compute(&snapshot, &self.config)?;
        let links = LinkRealization::draw(&large, &self.config, &mut self.rng);
        let state = encode_state(&snapshot, &links, &self.config);
        self.episode = Some(Episode {
            snapshot,
            large,
            links,
            slot: 0,
        });
        Ok(state)
    }

    /// Per-user rates the current channel would give under `action`,
    /// without advancing time.
    pub fn evaluate(&self, action: &PowerAction) -> Result<Vec<f64>> {
        let ep = self.episode.as_ref().ok_or(Error::NotReset)?;
        Ok(Downlink::new(&ep.snapshot, &ep.links, action, &self.config)?.rates())
    }

    pub fn step(&mut self, action: &PowerAction) -> Result<StepOutcome> {
        let ep = self.episode.as_mut().ok_or(Error::NotReset)?;
        if ep.slot >= self.slots_per_episode {
            return Err(Error::EpisodeFinished(self.slots_per_episode));
        }
        let user_rates = Downlink::new(&ep.snapshot, &ep.links, action, &self.config)?.rates();
        let reward = user_rates.iter().sum();
        let ccu_mean = group_mean(&user_rates, &ep.snapshot.is_ceu, false);
        let ceu_mean = group_mean(&user_rates, &ep.snapshot.is_ceu, true);

        ep.links = LinkRealization::draw(&ep.large, &self.config, &mut self.rng);
        ep.slot += 1;
        let next_state = encode_state(&ep.snapshot, &ep.links, &self.config);
        Ok(StepOutcome {
            reward,
            user_rates,
            next_state,
            ccu_mean,
            ceu_mean,
            truncated: ep.slot >= self.slots_per_episode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fading;

    #[test]
    fn state_dimensions() {
        let mut env = Env::new(NetworkConfig::default(), 50).unwrap();
        assert_eq!(env.reset().unwrap().len(), 54);
        let c = NetworkConfig {
            n_cells: 1,
            users_per_cell: 1,
            ..Default::default()
        };
        let mut env = Env::new(c, 50).unwrap();
        assert_eq!(env.reset().unwrap().len(), 3);
    }

    #[test]
    fn equal_seeds_equal_states() {
        let mut a = Env::new(NetworkConfig::default(), 50).unwrap();
        let mut b = Env::new(NetworkConfig::default(), 50).unwrap();
        assert_eq!(a.reset().unwrap(), b.reset().unwrap());
        let act = PowerAction::uniform(9, 4);
        assert_eq!(a.step(&act).unwrap(), b.step(&act).unwrap());
    }

    #[test]
    fn gain_window_endpoints() {
        assert_eq!(normalize_gain_db(-150.0), 0.0);
        assert_eq!(normalize_gain_db(-200.0), 0.0);
        assert_eq!(normalize_gain_db(-60.0), 1.0);
        assert_eq!(normalize_gain_db(f64::NEG_INFINITY), 0.0);
        assert!((normalize_gain_db(-105.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn indicator_requires_assistance() {
        let c = NetworkConfig {
            n_cells: 1,
            users_per_cell: 3,
            ref_distance_m: 400.0,
            ..Default::default()
        };
        let s = NetworkSnapshot::assemble(
            vec![Point2::default()],
            vec![
                Point2::new(1000.0, 0.0),
                Point2::new(300.0, 0.0),
                Point2::new(0.0, 800.0),
            ],
            &c,
        )
        .unwrap();
        let large = LargeScale::compute(&s, &c).unwrap();
        let links = LinkRealization::draw(
            &large,
            &NetworkConfig {
                fading: Fading::Unit,
                ..c.clone()
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let st = encode_state(&s, &links, &c);
        assert_eq!(&st.0[0..3], &[1.0, 0.3, 0.8]);
        // Users 0 and 2 are CEUs but only the nearer one (user 2) is assisted.
        assert_eq!(&st.0[6..9], &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn step_errors() {
        let mut env = Env::new(NetworkConfig::default(), 2).unwrap();
        let act = PowerAction::uniform(9, 0);
        assert_eq!(env.step(&act), Err(Error::NotReset));
        env.reset().unwrap();
        assert!(matches!(
            env.step(&PowerAction::uniform(9, 10)),
            Err(Error::InvalidAction(_))
        ));
        assert!(matches!(
            env.step(&PowerAction::uniform(8, 0)),
            Err(Error::InvalidAction(_))
        ));
        assert!(!env.step(&act).unwrap().truncated);
        assert!(env.step(&act).unwrap().truncated);
        assert_eq!(env.step(&act), Err(Error::EpisodeFinished(2)));
        env.reset().unwrap();
        assert!(env.step(&act).is_ok());
    }

    #[test]
    fn geometry_blocks_constant_within_episode() {
        let mut env = Env::new(NetworkConfig::default(), 50).unwrap();
        let s0 = env.reset().unwrap();
        let mut prev = s0.clone();
        let mut gains_changed = false;
        for _ in 0..50 {
            let out = env.step(&PowerAction::uniform(9, 9)).unwrap();
            assert_eq!(&out.next_state.0[..18], &s0.0[..18]);
            assert_eq!(&out.next_state.0[36..], &s0.0[36..]);
            gains_changed |= out.next_state.0[18..36] != prev.0[18..36];
            prev = out.next_state;
        }
        assert!(gains_changed);
    }

    #[test]
    fn single_cell_unit_sinr_reward() {
        // One cell, no UAV, unit fading: choose noise so every user sees SINR 1.
        let base = NetworkConfig {
            n_cells: 1,
            users_per_cell: 2,
            ref_distance_m: f64::INFINITY,
            fading: Fading::Unit,
            ..Default::default()
        };
        let s = NetworkSnapshot::assemble(
            vec![Point2::default()],
            vec![Point2::new(500.0, 0.0), Point2::new(0.0, -500.0)],
            &base,
        )
        .unwrap();
        let rx_dbm = 38.0 - crate::channel::pathloss_db(500.0, &base).unwrap();
        let c = NetworkConfig {
            noise_dbm: rx_dbm,
            ..base
        };
        let mut env = Env::frozen(c, s, 5).unwrap();
        env.reset().unwrap();
        let out = env.step(&PowerAction(vec![9])).unwrap();
        assert!((out.reward - 2.0).abs() < 1e-12, "reward {}", out.reward);
        assert_eq!(out.ceu_mean, None);
        assert!((out.ccu_mean.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn on_sites_requires_matching_count() {
        let c = NetworkConfig {
            n_cells: 2,
            ..Default::default()
        };
        assert!(Env::new(c.clone(), 10).is_err());
        assert!(Env::on_sites(c.clone(), vec![Point2::default()], 10).is_err());
        let mut env = Env::on_sites(c, vec![Point2::new(-1000.0, 0.0), Point2::new(1000.0, 0.0)], 10).unwrap();
        assert_eq!(env.reset().unwrap().len(), 12);
    }
}
