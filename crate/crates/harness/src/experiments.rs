//! Train/evaluate pipelines behind every scenario.
//!
//! A run with seed `s` trains on an environment seeded with `s` and is scored
//! on a separate environment seeded with `s + EVAL_SEED_OFFSET`, so that
//! evaluation episodes never replay training geometry. Every policy compared
//! under one seed sees the same evaluation snapshots and fading.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relaynet_core::dqn::{mean_rate, pooled_group_rate, random_action, run_greedy_eval, run_policy, run_training};
use relaynet_core::nn::Mlp;
use relaynet_core::{Agent, AgentConfig, Env, NetworkConfig, PowerAction, SlotRecord, TrainingLog};

use crate::error::Result;
use crate::settings::Settings;
use crate::table::{Cell, Table};

pub const EVAL_SEED_OFFSET: u64 = 1_000_000;
const RANDOM_POLICY_STREAM: u64 = 2;

pub const CURVE_COLUMNS: [&str; 8] = [
    "global_step",
    "episode",
    "slot",
    "rate_all",
    "rate_ccu",
    "rate_ceu",
    "epsilon",
    "loss",
];
pub const EPISODE_COLUMNS: [&str; 6] = ["episode", "rate_all", "rate_ccu", "rate_ceu", "epsilon", "loss"];
const RATE_COLUMNS: [&str; 6] = [
    "rate_all",
    "rate_ccu",
    "rate_ceu",
    "rate_all_std",
    "rate_ccu_std",
    "rate_ceu_std",
];

/// Runs `f` over `items` on all available cores, keeping input order.
fn parallel_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("worker panicked") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("worker panicked").expect("job skipped"))
        .collect()
}

/// Mean per-user rates of a batch of evaluation slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub rate_all: f64,
    pub rate_ccu: Option<f64>,
    pub rate_ceu: Option<f64>,
}

impl RateSummary {
    pub fn of(records: &[SlotRecord]) -> Self {
        Self {
            rate_all: mean_rate(records),
            rate_ccu: pooled_group_rate(records, false),
            rate_ceu: pooled_group_rate(records, true),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub log: TrainingLog,
    pub agent: Agent,
}

pub fn train_agent(network: &NetworkConfig, agent: &AgentConfig, seed: u64) -> Result<TrainedAgent> {
    let cfg = NetworkConfig {
        seed,
        ..network.clone()
    };
    let mut env = Env::new(cfg, agent.slots_per_episode)?;
    let mut a = Agent::for_env(agent.clone(), &env, seed)?;
    let log = run_training(&mut env, &mut a)?;
    Ok(TrainedAgent { log, agent: a })
}

pub fn eval_env(network: &NetworkConfig, agent: &AgentConfig, seed: u64) -> Result<Env> {
    let cfg = NetworkConfig {
        seed: seed.wrapping_add(EVAL_SEED_OFFSET),
        ..network.clone()
    };
    Ok(Env::new(cfg, agent.slots_per_episode)?)
}

pub fn greedy_eval(settings: &Settings, network: &NetworkConfig, net: &Mlp, seed: u64) -> Result<Vec<SlotRecord>> {
    let mut env = eval_env(network, &settings.agent, seed)?;
    Ok(run_greedy_eval(&mut env, net, settings.experiment.eval_episodes)?)
}

/// Training log, greedy evaluation log and final weights for one seed.
#[derive(Debug, Clone)]
pub struct CurveRun {
    pub seed: u64,
    pub training: TrainingLog,
    pub testing: Vec<SlotRecord>,
    pub model: Mlp,
}

pub fn run_curves(settings: &Settings) -> Result<Vec<CurveRun>> {
    settings.validate()?;
    parallel_map(&settings.experiment.seeds, |&seed| {
        let trained = train_agent(&settings.network, &settings.agent, seed)?;
        let testing = greedy_eval(settings, &settings.network, &trained.agent.online, seed)?;
        Ok(CurveRun {
            seed,
            training: trained.log,
            testing,
            model: trained.agent.online,
        })
    })
}

pub fn curve_table(records: &[SlotRecord]) -> Table {
    let mut t = Table::new(CURVE_COLUMNS);
    for r in records {
        t.rows.push(vec![
            Cell::Num(r.global_step as f64),
            Cell::Num(r.episode as f64),
            Cell::Num(r.slot as f64),
            r.rate_all.into(),
            r.rate_ccu.into(),
            r.rate_ceu.into(),
            r.epsilon.into(),
            r.loss.into(),
        ]);
    }
    t
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Per-episode means of a slot log.
pub fn episode_table(records: &[SlotRecord]) -> Table {
    let mut t = Table::new(EPISODE_COLUMNS);
    for chunk in records.chunk_by(|a, b| a.episode == b.episode) {
        t.rows.push(vec![
            Cell::Num(chunk[0].episode as f64),
            mean_of(chunk.iter().map(|r| r.rate_all)).into(),
            mean_of(chunk.iter().filter_map(|r| r.rate_ccu)).into(),
            mean_of(chunk.iter().filter_map(|r| r.rate_ceu)).into(),
            chunk[0].epsilon.into(),
            mean_of(chunk.iter().filter_map(|r| r.loss)).into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub d0_m: f64,
    pub altitude_m: f64,
    pub users_per_cell: usize,
}

impl SweepPoint {
    pub fn apply(&self, network: &NetworkConfig) -> NetworkConfig {
        NetworkConfig {
            ref_distance_m: self.d0_m,
            uav_altitude_m: self.altitude_m,
            users_per_cell: self.users_per_cell,
            ..network.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub seed: u64,
    pub rates: RateSummary,
}

fn sorted_f64(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn run_points(settings: &Settings, points: Vec<SweepPoint>) -> Result<Vec<SweepRow>> {
    settings.validate()?;
    let jobs: Vec<(SweepPoint, u64)> = points
        .iter()
        .flat_map(|p| settings.experiment.seeds.iter().map(move |&s| (*p, s)))
        .collect();
    parallel_map(&jobs, |&(point, seed)| {
        let network = point.apply(&settings.network);
        let trained = train_agent(&network, &settings.agent, seed)?;
        let records = greedy_eval(settings, &network, &trained.agent.online, seed)?;
        Ok(SweepRow {
            point,
            seed,
            rates: RateSummary::of(&records),
        })
    })
}

/// Trains and evaluates a fresh agent for every (D0, altitude, seed).
pub fn run_sweep_d0(settings: &Settings) -> Result<Vec<SweepRow>> {
    let k = settings.network.users_per_cell;
    let mut points = Vec::new();
    for &d0_m in &sorted_f64(&settings.experiment.d0_grid) {
        for &altitude_m in &sorted_f64(&settings.experiment.altitude_grid) {
            points.push(SweepPoint {
                d0_m,
                altitude_m,
                users_per_cell: k,
            });
        }
    }
    run_points(settings, points)
}

/// Trains and evaluates a fresh agent for every (K, seed), K ascending.
pub fn run_sweep_users(settings: &Settings) -> Result<Vec<SweepRow>> {
    let mut ks = settings.experiment.users_grid.clone();
    ks.sort_unstable();
    ks.dedup();
    let points = ks
        .into_iter()
        .map(|k| SweepPoint {
            d0_m: settings.network.ref_distance_m,
            altitude_m: settings.network.uav_altitude_m,
            users_per_cell: k,
        })
        .collect();
    run_points(settings, points)
}

/// Cross-seed mean and sample standard deviation of one metric. Seeds where
/// the metric is undefined (an empty group) are left out.
pub fn mean_std(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let xs: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = mean_of(xs.iter().copied());
    let std = mean.filter(|_| xs.len() > 1).map(|m| {
        let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
        (ss / (xs.len() - 1) as f64).sqrt()
    });
    (mean, std)
}

/// Per-seed rows for one key followed by its `seed=agg` row.
fn rate_rows(key: &[Cell], runs: &[(u64, RateSummary)]) -> Vec<Vec<Cell>> {
    let mut out = Vec::with_capacity(runs.len() + 1);
    for (seed, r) in runs {
        let mut row = key.to_vec();
        row.push(Cell::Num(*seed as f64));
        row.extend([r.rate_all.into(), r.rate_ccu.into(), r.rate_ceu.into()]);
        row.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
        out.push(row);
    }
    let stats = [
        mean_std(&runs.iter().map(|(_, r)| Some(r.rate_all)).collect::<Vec<_>>()),
        mean_std(&runs.iter().map(|(_, r)| r.rate_ccu).collect::<Vec<_>>()),
        mean_std(&runs.iter().map(|(_, r)| r.rate_ceu).collect::<Vec<_>>()),
    ];
    let mut agg = key.to_vec();
    agg.push("agg".into());
    agg.extend(stats.iter().map(|s| Cell::from(s.0)));
    agg.extend(stats.iter().map(|s| Cell::from(s.1)));
    out.push(agg);
    out
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(
        ["d0_m", "altitude_m", "users_per_cell", "seed"]
            .into_iter()
            .chain(RATE_COLUMNS),
    );
    for group in rows.chunk_by(|a, b| a.point == b.point) {
        let p = group[0].point;
        let key = [
            Cell::Num(p.d0_m),
            Cell::Num(p.altitude_m),
            Cell::Num(p.users_per_cell as f64),
        ];
        let runs: Vec<_> = group.iter().map(|r| (r.seed, r.rates)).collect();
        t.rows.extend(rate_rows(&key, &runs));
    }
    t
}

/// Seed-averaged overall rate per sweep point, in row order.
pub fn seed_means(rows: &[SweepRow]) -> Vec<(SweepPoint, f64)> {
    rows.chunk_by(|a, b| a.point == b.point)
        .map(|g| {
            (
                g[0].point,
                g.iter().map(|r| r.rates.rate_all).sum::<f64>() / g.len() as f64,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Dqn,
    MaxPower,
    Random,
    /// DQN trained and evaluated with UAV assistance disabled.
    DqnNoUav,
    /// DQN trained and evaluated with every user treated as cell-edge.
    DqnAllUav,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Dqn,
        Policy::MaxPower,
        Policy::Random,
        Policy::DqnNoUav,
        Policy::DqnAllUav,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Dqn => "dqn",
            Policy::MaxPower => "max_power",
            Policy::Random => "random",
            Policy::DqnNoUav => "dqn_no_uav",
            Policy::DqnAllUav => "dqn_all_uav",
        }
    }

    /// Network variant the policy runs on.
    pub fn network(&self, base: &NetworkConfig) -> NetworkConfig {
        let d0 = match self {
            Policy::DqnNoUav => f64::INFINITY,
            Policy::DqnAllUav => 0.0,
            _ => base.ref_distance_m,
        };
        NetworkConfig {
            ref_distance_m: d0,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub policy: Policy,
    pub d0_m: f64,
    pub seed: u64,
    pub rates: RateSummary,
}

/// Evaluation records of one policy on the paired evaluation environment.
pub fn policy_records(settings: &Settings, policy: Policy, seed: u64) -> Result<Vec<SlotRecord>> {
    let network = policy.network(&settings.network);
    let episodes = settings.experiment.eval_episodes;
    let (heads, levels) = (network.n_cells, network.n_power_levels);
    match policy {
        Policy::Dqn | Policy::DqnNoUav | Policy::DqnAllUav => {
            let trained = train_agent(&network, &settings.agent, seed)?;
            greedy_eval(settings, &network, &trained.agent.online, seed)
        }
        Policy::MaxPower => {
            let mut env = eval_env(&network, &settings.agent, seed)?;
            let max = PowerAction::uniform(heads, levels - 1);
            Ok(run_policy(&mut env, episodes, |_| Ok(max.clone()))?)
        }
        Policy::Random => {
            let mut env = eval_env(&network, &settings.agent, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(RANDOM_POLICY_STREAM);
            Ok(run_policy(&mut env, episodes, |_| {
                Ok(random_action(heads, levels, &mut rng))
            })?)
        }
    }
}

pub fn run_baselines(settings: &Settings) -> Result<Vec<BaselineRow>> {
    settings.validate()?;
    let jobs: Vec<(Policy, u64)> = Policy::ALL
        .iter()
        .flat_map(|&p| settings.experiment.seeds.iter().map(move |&s| (p, s)))
        .collect();
    parallel_map(&jobs, |&(policy, seed)| {
        let records = policy_records(settings, policy, seed)?;
        Ok(BaselineRow {
            policy,
            d0_m: policy.network(&settings.network).ref_distance_m,
            seed,
            rates: RateSummary::of(&records),
        })
    })
}

pub fn baseline_table(rows: &[BaselineRow]) -> Table {
    let mut t = Table::new(["policy", "d0_m", "seed"].into_iter().chain(RATE_COLUMNS));
    for group in rows.chunk_by(|a, b| a.policy == b.policy) {
        let key = [Cell::from(group[0].policy.as_str()), Cell::Num(group[0].d0_m)];
        let runs: Vec<_> = group.iter().map(|r| (r.seed, r.rates)).collect();
        t.rows.extend(rate_rows(&key, &runs));
    }
    t
}
